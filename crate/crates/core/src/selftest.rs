//! Oracle checks bundled into a single pass/fail summary, plus the random
//! instance generators they share with the test suites.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analytics::{birth_death_closed_form, build_transition_matrix, stationary_distribution, ExcessPmf};
use crate::control::{Controller, LyapunovParams};
use crate::error::{Error, Result};
use crate::experiments::unit_arrival_scenario;
use crate::grid::{Capacities, GridScenario, MicrogridState, PriceTable, SlotExogenous};
use crate::scenario::{substream, ArrivalSpec, StreamPurpose};
use crate::sim::{check_drift_bound, run_simulation, Fault, SimOptions};
use crate::slot::{brute_force_slot, build_slot_problem, solve_slot, SlotProblem, DEFAULT_SLOT_TOL};

/// Slot LP with at most 3 MGs and small budgets so that a 0.01 grid is cheap.
///
/// Half the instances come from the drift-plus-penalty construction with
/// random battery levels and prices, half have arbitrary coefficients
/// including exact zeros.
pub fn random_slot_problem<R: Rng + ?Sized>(rng: &mut R) -> SlotProblem {
    let n = rng.random_range(1..=3);
    let mut excess = vec![0.0; n];
    let mut deficit = vec![0.0; n];
    for i in 0..n {
        match rng.random_range(0..3) {
            0 => excess[i] = rng.random_range(0.01..0.2),
            1 => deficit[i] = rng.random_range(0.01..0.2),
            _ => {}
        }
    }
    let rate = rng.random_range(0.02..0.2);
    let b_ex = rng.random_range(0.02..0.2);
    if rng.random_bool(0.5) {
        let e_max = 2.0 * rate + rng.random_range(0.1..5.0);
        let caps = Capacities::new(e_max, rate, rate, b_ex).expect("valid caps");
        let exchange = (0..n * n).map(|_| rng.random_range(0.0..4.0)).collect();
        let macro_price = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
        let prices = PriceTable::new(exchange, macro_price).expect("valid prices");
        let q_max = prices.q_max();
        let v = rng.random_range(0.05..=1.0) * (e_max - 2.0 * rate) / q_max;
        let theta = rate + v * q_max;
        let state = MicrogridState {
            energy: (0..n).map(|_| rng.random_range(0.0..=e_max)).collect(),
        };
        let exo = SlotExogenous::from_split(excess, deficit).expect("disjoint split");
        build_slot_problem(v, theta, &state, &exo, &prices, &caps)
    } else {
        let coeff = |rng: &mut R| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random_range(-3.0..3.0)
            }
        };
        SlotProblem {
            n,
            charge_coeff: (0..n).map(|_| coeff(rng)).collect(),
            discharge_coeff: (0..n).map(|_| coeff(rng)).collect(),
            exchange_coeff: (0..n * n).map(|_| coeff(rng)).collect(),
            source_budget: excess,
            sink_budget: deficit,
            y_max: rate,
            b_s_max: rng.random_range(0.02..0.2),
            b_ex_max: b_ex,
        }
    }
}

/// Grid step of the brute-force oracle.
pub const ORACLE_STEP: f64 = 0.01;

/// Outcome of one solver-versus-oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    pub solver: f64,
    pub oracle: f64,
    pub allowance: f64,
    pub infeasibility: f64,
}

impl OracleGap {
    pub fn ok(&self) -> bool {
        self.solver <= self.oracle + self.allowance && self.infeasibility <= 1e-9
    }
}

pub fn compare_with_oracle(problem: &SlotProblem) -> Result<OracleGap> {
    let fast = solve_slot(problem, DEFAULT_SLOT_TOL)?;
    let slow = brute_force_slot(problem, ORACLE_STEP)?;
    Ok(OracleGap {
        solver: problem.objective(&fast),
        oracle: problem.objective(&slow),
        allowance: ORACLE_STEP * problem.coefficient_mass() + 1e-12,
        infeasibility: problem.infeasibility(&fast).max(0.0),
    })
}

/// Random scenario for invariant runs: 1 to 5 MGs, random capacities,
/// distance-free random prices, truncated-normal arrivals.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R) -> GridScenario {
    let n = rng.random_range(1..=5);
    let rate = rng.random_range(0.2..3.0);
    let e_max = 2.0 * rate + rng.random_range(0.2..20.0);
    let caps = Capacities::new(e_max, rate, rng.random_range(0.2..rate.max(0.21)), rng.random_range(0.0..5.0))
        .expect("valid caps");
    let exchange = (0..n * n).map(|_| rng.random_range(0.0..5.0)).collect();
    let macro_price = (0..n).map(|_| rng.random_range(0.5..6.0)).collect();
    let prices = PriceTable::new(exchange, macro_price).expect("valid prices");
    let arrival = ArrivalSpec::truncated_normal(rng.random_range(0.5..4.0), 10.0);
    let start = rng.random_range(0.0..=e_max);
    GridScenario::new(prices, vec![10.0; n], caps, arrival)
        .and_then(|s| s.with_initial_energy(vec![start; n]))
        .expect("valid scenario")
}

/// Runs the drift-plus-penalty controller on `scenario` and checks the
/// battery guarantees and the per-slot drift bound.
pub fn invariant_run(scenario: &GridScenario, horizon: usize, rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Result<f64> {
    let params = LyapunovParams::for_scenario(scenario, None)?;
    let mut controller = Controller::Lyapunov(params);
    let options = SimOptions {
        record_trace: true,
        fault,
        ..SimOptions::default()
    };
    let run = run_simulation(scenario, &mut controller, horizon, rng, &options)?;
    let trace = run.trace.expect("trace requested");
    let theta = controller.theta().unwrap_or(params.theta);
    let check = check_drift_bound(&trace, theta);
    if !check.passed {
        return Err(Error::invariant(
            check.worst_slot,
            format!("drift bound exceeded by {}", -check.worst_slack),
        ));
    }
    Ok(check.worst_slack)
}

fn unit_scenario() -> GridScenario {
    unit_arrival_scenario(0.2, 0.5, 1.0, 5, 1.0).expect("valid scenario")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<34} {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub slot_instances: usize,
    pub invariant_configs: usize,
    pub invariant_horizon: usize,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            slot_instances: 300,
            invariant_configs: 10,
            invariant_horizon: 20_000,
            fault: None,
        }
    }
}

/// Runs every check; the caller decides what to do with failures.
pub fn run_selftest(options: &SelftestOptions) -> Vec<CheckResult> {
    let mut results = Vec::new();

    let mut worst = 0.0_f64;
    let mut failure = None;
    for &(a, d) in &[(0.1, 0.3), (0.2, 0.5), (0.5, 0.3), (0.3, 0.1)] {
        for &e in &[1usize, 2, 5, 10, 50] {
            let pmf = ExcessPmf::three_point(a, d).expect("valid pmf");
            match (stationary_distribution(&build_transition_matrix(&pmf, e)), birth_death_closed_form(a, d, e)) {
                (Ok(num), Ok(closed)) => {
                    worst = num.iter().zip(&closed).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
                }
                (Err(err), _) | (_, Err(err)) => failure = Some(err.to_string()),
            }
        }
    }
    results.push(CheckResult {
        name: "closed-form vs numeric stationary law",
        passed: failure.is_none() && worst <= 1e-10,
        detail: failure.unwrap_or_else(|| format!("max abs error {worst:.2e}")),
    });

    let mut rng = substream(options.seed, 0, StreamPurpose::Arrivals);
    let mut bad = 0;
    let mut errors = 0;
    for _ in 0..options.slot_instances {
        match compare_with_oracle(&random_slot_problem(&mut rng)) {
            Ok(gap) if gap.ok() => {}
            Ok(_) => bad += 1,
            Err(_) => errors += 1,
        }
    }
    results.push(CheckResult {
        name: "slot solver vs brute force",
        passed: bad == 0 && errors == 0,
        detail: format!("{} instances, {bad} worse than oracle, {errors} errors", options.slot_instances),
    });

    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for k in 0..options.invariant_configs {
        // Config 0 has unit arrivals, which visit the battery boundaries often.
        let scenario = if k == 0 {
            unit_scenario()
        } else {
            random_scenario(&mut substream(options.seed, k as u64, StreamPurpose::Geometry))
        };
        let mut arrivals = substream(options.seed, k as u64, StreamPurpose::Arrivals);
        match invariant_run(&scenario, options.invariant_horizon, &mut arrivals, options.fault) {
            Ok(slack) => min_slack = min_slack.min(slack),
            Err(err) => failures.push(format!("config {k}: {err}")),
        }
    }
    results.push(CheckResult {
        name: "battery guarantees and drift bound",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "{} configs x {} slots, min drift slack {min_slack:.3e}",
                options.invariant_configs, options.invariant_horizon
            )
        } else {
            failures.join("; ")
        },
    });

    // The checks must notice deliberately broken runs.
    let scenario = unit_scenario();
    for (name, fault) in [
        ("mutation: battery off by one", Fault::BatteryOffByOne),
        ("mutation: wrong battery shift", Fault::WrongTheta),
    ] {
        let mut arrivals = substream(options.seed, 0, StreamPurpose::Arrivals);
        let outcome = invariant_run(&scenario, options.invariant_horizon, &mut arrivals, Some(fault));
        results.push(CheckResult {
            name,
            passed: outcome.is_err(),
            detail: match outcome {
                Err(err) => format!("caught: {err}"),
                Ok(_) => "not detected".to_string(),
            },
        });
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_passes() {
        let options = SelftestOptions {
            slot_instances: 40,
            invariant_configs: 3,
            invariant_horizon: 2000,
            ..SelftestOptions::default()
        };
        let results = run_selftest(&options);
        for r in &results {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn injected_fault_fails_the_invariant_check() {
        let options = SelftestOptions {
            slot_instances: 5,
            invariant_configs: 2,
            invariant_horizon: 2000,
            fault: Some(Fault::BatteryOffByOne),
            ..SelftestOptions::default()
        };
        let results = run_selftest(&options);
        assert!(results.iter().any(|r| !r.passed));
    }
}
