//! The slot loop: arrivals, decision, validation, cost, battery update.

mod replicate;
mod search;

pub use replicate::{run_replications, ReplicationSet};
pub use search::{storage_requirement_search, Probe, SearchOutcome, StorageSearch};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::ExcessPmf;
use crate::control::{check_battery_guarantee, Controller};
use crate::error::{Error, Result};
use crate::grid::{
    battery_step, validate_decision, Capacities, CostLedger, GridScenario, MicrogridState, SlotDecision, EQ_TOL,
};
use crate::scenario::{sample_excess, slot_from_excess};

/// Number of batches for the batch-means standard error.
pub const BATCHES: usize = 20;

/// Deliberate faults used to check that the invariant checks fire.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Every battery update adds one extra unit to MG 0.
    BatteryOffByOne,
    /// The controller shift omits the `b_s_max` term.
    WrongTheta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Validate every k-th slot; 1 checks all of them.
    pub check_every: usize,
    pub record_trace: bool,
    /// Fraction of slots dropped before the steady-state average.
    pub burn_in_fraction: f64,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            check_every: 1,
            record_trace: false,
            burn_in_fraction: 0.0,
            fault: None,
        }
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub replication: u64,
    pub seed: u64,
    pub config_digest: String,
    pub controller: String,
    pub horizon: usize,
    pub n_mgs: usize,
    pub total_cost: f64,
    /// `total / T`.
    pub time_average_cost: f64,
    /// `total / (T N)`.
    pub normalized_cost: f64,
    /// Normalized cost over the slots after burn-in.
    pub steady_state_cost: f64,
    /// Batch-means standard error of `steady_state_cost`.
    pub standard_error: f64,
    pub macro_energy_mwh: Vec<f64>,
    pub exported_energy_mwh: Vec<f64>,
    pub imported_energy_mwh: Vec<f64>,
    pub stored_energy_mwh: Vec<f64>,
    pub discharged_energy_mwh: Vec<f64>,
    pub battery_min_mwh: Vec<f64>,
    pub battery_max_mwh: Vec<f64>,
    pub battery_mean_mwh: Vec<f64>,
    pub violations: usize,
}

/// Per-MG quantities of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Battery level at the start of the slot.
    pub energy: Vec<f64>,
    pub excess: Vec<f64>,
    pub deficit: Vec<f64>,
    pub charge: Vec<f64>,
    pub self_discharge: Vec<f64>,
    pub imported: Vec<f64>,
    pub exported: Vec<f64>,
    pub macro_draw: Vec<f64>,
    pub cost: Vec<f64>,
}

/// Slot-by-slot history of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub caps: Capacities,
    pub theta: Option<f64>,
    pub records: Vec<SlotRecord>,
    pub final_energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub report: SimReport,
    pub trace: Option<Trace>,
}

fn at_slot(err: Error, slot: usize) -> Error {
    match err {
        Error::Invariant { message, .. } => Error::Invariant { slot, message },
        other => other,
    }
}

/// Runs `horizon` slots from the scenario's initial battery levels.
///
/// Every checked slot must pass [`validate_decision`]; battery levels must
/// stay in `[0, e_max]`. Any violation aborts with the offending slot.
pub fn run_simulation<R: Rng + ?Sized>(
    scenario: &GridScenario,
    controller: &mut Controller,
    horizon: usize,
    arrivals: &mut R,
    options: &SimOptions,
) -> Result<SimRun> {
    scenario.validate()?;
    if horizon == 0 {
        return Err(Error::validation("horizon_slots", "must be >= 1"));
    }
    let n = scenario.n_mgs();
    let caps = scenario.caps;
    let check_every = options.check_every.max(1);
    if options.fault == Some(Fault::WrongTheta) {
        if let Controller::Lyapunov(params) = controller {
            params.theta -= caps.b_s_max_mwh;
        }
    }

    let mut state = scenario.initial_state();
    let mut ledger = CostLedger::new(n);
    let mut per_slot = Vec::with_capacity(horizon);
    let mut battery_min = state.energy.clone();
    let mut battery_max = state.energy.clone();
    let mut battery_sum = vec![0.0; n];
    let mut records = options.record_trace.then(|| Vec::with_capacity(horizon));

    for t in 0..horizon {
        let signed = sample_excess(arrivals, &scenario.arrival, n);
        let exo = slot_from_excess(&scenario.load_mw, &signed)?;
        let decision = controller.decide(scenario, &state, &exo).map_err(|e| at_slot(e, t))?;
        if t % check_every == 0 {
            let report = validate_decision(&caps, &state, &exo, &decision);
            if !report.is_feasible() {
                return Err(Error::invariant(t, format!("{} produced {report}", controller.name())));
            }
            if matches!(controller, Controller::Lyapunov(_)) {
                check_battery_guarantee(&caps, &state, &decision).map_err(|e| at_slot(e, t))?;
            }
        }
        let cost = ledger.record(&decision, &scenario.prices);
        per_slot.push(cost / n as f64);

        let mut next = battery_step(&caps, &state, &decision).map_err(|e| at_slot(e, t))?;
        if options.fault == Some(Fault::BatteryOffByOne) {
            next.energy[0] += 1.0;
            if next.energy[0] > caps.e_max_mwh + EQ_TOL {
                return Err(Error::invariant(
                    t,
                    format!("battery 0 reached {} above e_max {}", next.energy[0], caps.e_max_mwh),
                ));
            }
        }
        for i in 0..n {
            let e = state.energy[i];
            battery_min[i] = battery_min[i].min(e);
            battery_max[i] = battery_max[i].max(e);
            battery_sum[i] += e;
        }
        if let Some(records) = records.as_mut() {
            records.push(record(t, &state, &exo.excess, &exo.deficit, &decision, &ledger.last_slot_cost));
        }
        state = next;
    }

    let total = ledger.total_cost();
    let burn = ((options.burn_in_fraction.clamp(0.0, 0.999)) * horizon as f64).floor() as usize;
    let kept = &per_slot[burn.min(horizon - 1)..];
    let steady = kept.iter().sum::<f64>() / kept.len() as f64;
    let report = SimReport {
        replication: 0,
        seed: 0,
        config_digest: String::new(),
        controller: controller.name().to_string(),
        horizon,
        n_mgs: n,
        total_cost: total,
        time_average_cost: total / horizon as f64,
        normalized_cost: total / (horizon as f64 * n as f64),
        steady_state_cost: steady,
        standard_error: batch_means_se(kept, BATCHES),
        macro_energy_mwh: ledger.macro_energy,
        exported_energy_mwh: ledger.exported_energy,
        imported_energy_mwh: ledger.imported_energy,
        stored_energy_mwh: ledger.stored_energy,
        discharged_energy_mwh: ledger.discharged_energy,
        battery_min_mwh: battery_min,
        battery_max_mwh: battery_max,
        battery_mean_mwh: battery_sum.iter().map(|s| s / horizon as f64).collect(),
        violations: 0,
    };
    let trace = records.map(|records| Trace {
        caps,
        theta: controller.theta(),
        records,
        final_energy: state.energy,
    });
    Ok(SimRun { report, trace })
}

fn record(
    slot: usize,
    state: &MicrogridState,
    excess: &[f64],
    deficit: &[f64],
    d: &SlotDecision,
    cost: &[f64],
) -> SlotRecord {
    let n = state.n();
    SlotRecord {
        slot,
        energy: state.energy.clone(),
        excess: excess.to_vec(),
        deficit: deficit.to_vec(),
        charge: d.charge.clone(),
        self_discharge: d.self_discharge.clone(),
        imported: (0..n).map(|i| d.imported(i)).collect(),
        exported: (0..n).map(|i| d.exported(i)).collect(),
        macro_draw: d.macro_draw.clone(),
        cost: cost.to_vec(),
    }
}

/// Standard error of the mean of a correlated series from `batches`
/// contiguous batch averages. Short series fall back to one batch per point.
pub fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let len = series.len();
    if len < 2 {
        return 0.0;
    }
    let batches = if len >= 2 * batches { batches } else { len };
    let size = len / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let (mean, sd) = mean_and_sd(&means);
    let _ = mean;
    sd / (batches as f64).sqrt()
}

/// Sample mean and (n − 1) standard deviation.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Outcome of [`check_drift_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCheck {
    pub passed: bool,
    /// Smallest `bound − drift` over all slots; negative means a violation.
    pub worst_slack: f64,
    pub worst_slot: usize,
}

/// Checks, slot by slot, that `Ψ(t+1) − Ψ(t) ≤ N (y_max² + b_s_max²)/2 −
/// Σ_i (E_i − θ)(B_ii − Y_i)` with `Ψ = ½ Σ_i (E_i − θ)²`.
pub fn check_drift_bound(trace: &Trace, theta: f64) -> DriftCheck {
    let caps = trace.caps;
    let c = caps.y_max_mwh.powi(2) + caps.b_s_max_mwh.powi(2);
    let psi = |energy: &[f64]| 0.5 * energy.iter().map(|e| (e - theta).powi(2)).sum::<f64>();
    let mut worst = DriftCheck {
        passed: true,
        worst_slack: f64::INFINITY,
        worst_slot: 0,
    };
    for (k, rec) in trace.records.iter().enumerate() {
        let n = rec.energy.len();
        let next = trace.records.get(k + 1).map_or(&trace.final_energy, |r| &r.energy);
        let drift = psi(next) - psi(&rec.energy);
        let linear: f64 = (0..n)
            .map(|i| (rec.energy[i] - theta) * (rec.self_discharge[i] - rec.charge[i]))
            .sum();
        let bound = n as f64 * c / 2.0 - linear;
        let slack = bound - drift;
        let tol = 1e-9 * (1.0 + bound.abs() + drift.abs());
        if slack < worst.worst_slack {
            worst.worst_slack = slack;
            worst.worst_slot = rec.slot;
        }
        if slack < -tol {
            worst.passed = false;
        }
    }
    worst
}

/// Time-average macro cost of the clipped walk `E' = min(max(E + X, 0), e_max)`
/// with integer arrivals; a deficit larger than the stored energy is bought
/// at `q_max` per unit.
pub fn simulate_clipped_walk<R: Rng + ?Sized>(
    pmf: &ExcessPmf,
    e_max: usize,
    q_max: f64,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let mut energy: i64 = 0;
    let cap = e_max as i64;
    let mut shortage: i64 = 0;
    for _ in 0..horizon {
        let x = pmf.quantile(rng.random::<f64>());
        let next = energy + x;
        if next < 0 {
            shortage += -next;
        }
        energy = next.clamp(0, cap);
    }
    q_max * shortage as f64 / horizon as f64
}
