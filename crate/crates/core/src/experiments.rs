//! Cost-vs-capacity, cost-vs-cooperation, and storage-requirement studies,
//! plus the analytic tables. Each study returns rows and renders a [`Table`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    birth_death_closed_form, optimize_alpha, single_mg_cost, two_mg_cost, ExcessPmf, Storage, StationaryModel,
    TwoMgPolicy,
};
use crate::control::Controller;
use crate::error::Result;
use crate::grid::{Capacities, GridScenario, PriceTable};
use crate::report::{Cell, Table};
use crate::scenario::{
    substream, ArrivalSpec, ControllerSpec, ExperimentConfig, Geometry, Pricing, ScenarioTemplate, StreamPurpose,
};
use crate::sim::{
    run_replications, run_simulation, simulate_clipped_walk, storage_requirement_search, SearchOutcome, SimOptions,
    StorageSearch,
};

/// Settings shared by the single-MG unit-arrival studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Options {
    pub seed: u64,
    pub horizon_slots: usize,
    pub a: f64,
    pub d: f64,
    pub q_max: f64,
    /// Capacities to evaluate; 0 means no battery at all.
    pub e_max_mwh: Vec<usize>,
    /// Charge and discharge limit for every nonzero capacity.
    pub rate_mwh: f64,
}

impl Default for Fig4Options {
    fn default() -> Self {
        Self {
            seed: 2024,
            horizon_slots: 5000,
            a: 0.2,
            d: 0.5,
            q_max: 1.0,
            e_max_mwh: vec![0, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20],
            rate_mwh: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub e_max_mwh: usize,
    pub analytic_cost: f64,
    pub simulated_cost: f64,
    pub standard_error: f64,
}

/// Single-MG scenario with `{-1: d, 0, +1: a}` unit arrivals.
pub fn unit_arrival_scenario(a: f64, d: f64, q_max: f64, e_max: usize, rate: f64) -> Result<GridScenario> {
    let caps = if e_max == 0 {
        Capacities::new(0.0, 0.0, 0.0, 0.0)?
    } else {
        Capacities::new(e_max as f64, rate, rate, 0.0)?
    };
    let arrival = ArrivalSpec::Discrete {
        pmf: ExcessPmf::three_point(a, d)?,
        unit_mwh: 1.0,
    };
    GridScenario::new(PriceTable::uniform(1, 0.0, q_max)?, vec![10.0], caps, arrival)
}

/// Analytic steady-state cost and drift-plus-penalty simulation per
/// capacity. All capacities see the same arrival sequence.
pub fn fig4(options: &Fig4Options) -> Result<Vec<Fig4Row>> {
    let pmf = ExcessPmf::three_point(options.a, options.d)?;
    options
        .e_max_mwh
        .par_iter()
        .map(|&e_max| {
            let analytic_cost = single_mg_cost(&pmf, e_max, options.q_max)?;
            let scenario = unit_arrival_scenario(options.a, options.d, options.q_max, e_max, options.rate_mwh)?;
            let mut controller = Controller::from_spec(
                &ControllerSpec::Lyapunov { v: None },
                &scenario,
                substream(options.seed, 0, StreamPurpose::Controller),
            )?;
            let mut arrivals = substream(options.seed, 0, StreamPurpose::Arrivals);
            let run = run_simulation(
                &scenario,
                &mut controller,
                options.horizon_slots,
                &mut arrivals,
                &SimOptions::default(),
            )?;
            Ok(Fig4Row {
                e_max_mwh: e_max,
                analytic_cost,
                simulated_cost: run.report.normalized_cost,
                standard_error: run.report.standard_error,
            })
        })
        .collect()
}

pub fn fig4_table(rows: &[Fig4Row]) -> Table {
    let mut t = Table::new(&["e_max_mwh", "analytic_cost", "simulated_cost", "standard_error"]);
    for r in rows {
        t.push(vec![
            r.e_max_mwh.into(),
            r.analytic_cost.into(),
            r.simulated_cost.into(),
            r.standard_error.into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkRow {
    pub e_max_mwh: usize,
    pub closed_form_cost: f64,
    pub simulated_cost: f64,
}

/// Closed-form cost against a direct simulation of the clipped walk.
pub fn clipped_walk_check(a: f64, d: f64, q_max: f64, e_max: &[usize], horizon: usize, seed: u64) -> Result<Vec<WalkRow>> {
    let pmf = ExcessPmf::three_point(a, d)?;
    e_max
        .par_iter()
        .map(|&e| {
            let pi = birth_death_closed_form(a, d, e)?;
            let mut rng = substream(seed, e as u64, StreamPurpose::Arrivals);
            Ok(WalkRow {
                e_max_mwh: e,
                closed_form_cost: q_max * d * pi[0],
                simulated_cost: simulate_clipped_walk(&pmf, e, q_max, horizon, &mut rng),
            })
        })
        .collect()
}

pub fn walk_table(rows: &[WalkRow]) -> Table {
    let mut t = Table::new(&["e_max_mwh", "closed_form_cost", "simulated_cost"]);
    for r in rows {
        t.push(vec![r.e_max_mwh.into(), r.closed_form_cost.into(), r.simulated_cost.into()]);
    }
    t
}

/// Cooperation study on random farms with distance prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Options {
    pub seed: u64,
    pub snapshots: usize,
    pub horizon_slots: usize,
    pub n_mgs: Vec<usize>,
    /// `(e_max, y_max = b_s_max)` pairs in MWh.
    pub capacities_mwh: Vec<(f64, f64)>,
    pub b_ex_max_mwh: f64,
    pub load_mw: f64,
    pub sigma_mw: f64,
    pub truncation_mw: f64,
    pub beta_per_km: f64,
    pub farm_side_km: f64,
    pub macro_km: [f64; 2],
}

impl Default for Fig5Options {
    fn default() -> Self {
        Self::desk()
    }
}

impl Fig5Options {
    /// Desk-scale defaults: 20 snapshots of 2000 slots.
    pub fn desk() -> Self {
        Self {
            seed: 2024,
            snapshots: 20,
            horizon_slots: 2000,
            n_mgs: vec![1, 2, 3, 4, 5],
            capacities_mwh: vec![(2.0, 0.5), (5.0, 1.0), (10.0, 2.0), (20.0, 5.0), (50.0, 10.0)],
            b_ex_max_mwh: 10.0,
            load_mw: 10.0,
            sigma_mw: 3.0,
            truncation_mw: 10.0,
            beta_per_km: 1.0,
            farm_side_km: 10.0,
            macro_km: [20.0, 20.0],
        }
    }

    /// 100 snapshots of 5000 slots.
    pub fn full_scale() -> Self {
        Self {
            snapshots: 100,
            horizon_slots: 5000,
            ..Self::desk()
        }
    }

    fn config(&self, n: usize, e_max: f64, rate: f64) -> ExperimentConfig {
        ExperimentConfig {
            seed: self.seed,
            horizon_slots: self.horizon_slots,
            replications: self.snapshots,
            scenario: ScenarioTemplate {
                n_mgs: n,
                geometry: Geometry::RandomFarm {
                    farm_side_km: self.farm_side_km,
                    macro_km: self.macro_km,
                },
                pricing: Pricing::Distance {
                    beta_per_km: self.beta_per_km,
                },
                load_mw: self.load_mw,
                e_max_mwh: e_max,
                y_max_mwh: rate,
                b_s_max_mwh: rate,
                b_ex_max_mwh: self.b_ex_max_mwh,
                arrival: ArrivalSpec::truncated_normal(self.sigma_mw, self.truncation_mw),
                initial_energy_mwh: 0.0,
            },
            controller: ControllerSpec::Lyapunov { v: None },
            burn_in_fraction: 0.0,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig5Row {
    pub n_mgs: usize,
    pub e_max_mwh: f64,
    pub rate_mwh: f64,
    pub mean_cost: f64,
    pub standard_error: f64,
    pub snapshots: usize,
}

/// Normalized cost per `(N, e_max)` cell, mean ± standard error over
/// snapshots. Snapshot `k` uses the same random stream in every cell, so
/// the first MGs of a larger farm sit where the smaller farm's MGs sit.
pub fn fig5(options: &Fig5Options) -> Result<Vec<Fig5Row>> {
    let mut rows = Vec::new();
    for &(e_max, rate) in &options.capacities_mwh {
        for &n in &options.n_mgs {
            let set = run_replications(&options.config(n, e_max, rate), &SimOptions::default())?;
            rows.push(Fig5Row {
                n_mgs: n,
                e_max_mwh: e_max,
                rate_mwh: rate,
                mean_cost: set.mean_cost,
                standard_error: set.standard_error,
                snapshots: options.snapshots,
            });
        }
    }
    Ok(rows)
}

pub fn fig5_table(rows: &[Fig5Row]) -> Table {
    let mut t = Table::new(&["n_mgs", "e_max_mwh", "rate_mwh", "normalized_cost", "standard_error", "snapshots"]);
    for r in rows {
        t.push(vec![
            r.n_mgs.into(),
            r.e_max_mwh.into(),
            r.rate_mwh.into(),
            r.mean_cost.into(),
            r.standard_error.into(),
            r.snapshots.into(),
        ]);
    }
    t
}

/// Storage requirement study under constant prices `p = β`, `q = 3β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig6Options {
    pub seed: u64,
    pub snapshots: usize,
    pub horizon_slots: usize,
    pub n_mgs: Vec<usize>,
    /// Normalized cost target per slot and MG.
    pub target: f64,
    pub beta: f64,
    pub b_ex_max_mwh: f64,
    pub load_mw: f64,
    pub sigma_mw: f64,
    pub truncation_mw: f64,
    pub search: StorageSearch,
}

/// `β` times the 10 MW demand: serving the whole load by exchange each slot.
pub fn local_exchange_target(beta: f64, load_mw: f64) -> f64 {
    beta * load_mw
}

impl Default for Fig6Options {
    fn default() -> Self {
        Self::desk()
    }
}

impl Fig6Options {
    pub fn desk() -> Self {
        Self {
            seed: 2024,
            snapshots: 20,
            horizon_slots: 2000,
            n_mgs: vec![1, 2, 3, 5],
            target: local_exchange_target(1.0, 10.0),
            beta: 1.0,
            b_ex_max_mwh: 10.0,
            load_mw: 10.0,
            sigma_mw: 3.0,
            truncation_mw: 10.0,
            search: StorageSearch::default(),
        }
    }

    pub fn full_scale() -> Self {
        Self {
            snapshots: 100,
            horizon_slots: 5000,
            ..Self::desk()
        }
    }

    fn template(&self) -> ExperimentConfig {
        let e = self.search.resolution_mwh;
        let rate = e * self.search.rate_fraction;
        ExperimentConfig {
            seed: self.seed,
            horizon_slots: self.horizon_slots,
            replications: self.snapshots,
            scenario: ScenarioTemplate {
                n_mgs: 1,
                geometry: Geometry::None,
                pricing: Pricing::Constant { beta: self.beta },
                load_mw: self.load_mw,
                e_max_mwh: e,
                y_max_mwh: rate,
                b_s_max_mwh: rate,
                b_ex_max_mwh: self.b_ex_max_mwh,
                arrival: ArrivalSpec::truncated_normal(self.sigma_mw, self.truncation_mw),
                initial_energy_mwh: 0.0,
            },
            controller: ControllerSpec::Lyapunov { v: None },
            burn_in_fraction: 0.0,
            output_dir: None,
        }
    }
}

/// Minimal capacity per `N` meeting the target.
pub fn fig6(options: &Fig6Options) -> Result<Vec<SearchOutcome>> {
    let template = options.template();
    template.validate()?;
    options
        .n_mgs
        .iter()
        .map(|&n| storage_requirement_search(&template, n, options.target, &options.search, &SimOptions::default()))
        .collect()
}

pub fn fig6_table(rows: &[SearchOutcome]) -> Table {
    let mut t = Table::new(&[
        "n_mgs",
        "target",
        "required_e_max_mwh",
        "status",
        "cost_at_required",
        "probes",
        "monotone",
        "replications",
    ]);
    for r in rows {
        let at = r
            .required_e_max_mwh
            .and_then(|e| r.probes.iter().find(|p| p.e_max_mwh == e))
            .map(|p| p.mean_cost);
        t.push(vec![
            r.n_mgs.into(),
            r.target.into(),
            r.required_e_max_mwh.into(),
            if r.required_e_max_mwh.is_some() { "ok" } else { "unreachable" }.into(),
            at.into(),
            r.probes.len().into(),
            if r.monotone { "yes" } else { "no" }.into(),
            r.replications.into(),
        ]);
    }
    t
}

/// One row per probe of every search.
pub fn fig6_probe_table(rows: &[SearchOutcome]) -> Table {
    let mut t = Table::new(&["n_mgs", "e_max_mwh", "normalized_cost", "standard_error"]);
    for r in rows {
        for p in &r.probes {
            t.push(vec![r.n_mgs.into(), p.e_max_mwh.into(), p.mean_cost.into(), p.standard_error.into()]);
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticOptions {
    pub a: f64,
    pub d: f64,
    pub p_max: f64,
    pub q_max: f64,
    pub e_max: Vec<usize>,
}

impl Default for AnalyticOptions {
    fn default() -> Self {
        Self {
            a: 0.2,
            d: 0.5,
            p_max: 1.0,
            q_max: 3.0,
            e_max: (0..=50).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub e_max: usize,
    pub pi: Vec<f64>,
    pub single_mg_cost: f64,
    pub two_mg_cost_no_sharing: f64,
    pub alpha_star: f64,
    pub two_mg_cost_at_alpha_star: f64,
}

/// Stationary law, single-MG cost, and the optimal two-MG sharing
/// probability per capacity.
pub fn analytic(options: &AnalyticOptions) -> Result<Vec<AnalyticRow>> {
    let pmf = ExcessPmf::three_point(options.a, options.d)?;
    options
        .e_max
        .iter()
        .map(|&e| {
            let model = StationaryModel::solve(&pmf, e)?;
            let family = TwoMgPolicy {
                alpha: 0.0,
                a: options.a,
                d: options.d,
                storage: Storage::Finite(e),
                p_max: options.p_max,
                q_max: options.q_max,
            };
            let (alpha_star, best) = optimize_alpha(&family)?;
            Ok(AnalyticRow {
                e_max: e,
                single_mg_cost: model.macro_cost(options.q_max),
                pi: model.pi,
                two_mg_cost_no_sharing: two_mg_cost(&family)?,
                alpha_star,
                two_mg_cost_at_alpha_star: best,
            })
        })
        .collect()
}

pub fn analytic_table(options: &AnalyticOptions, rows: &[AnalyticRow]) -> Table {
    let mut t = Table::new(&[
        "a",
        "d",
        "p_max",
        "q_max",
        "e_max_mwh",
        "pi",
        "single_mg_cost",
        "two_mg_cost_no_sharing",
        "alpha_star",
        "two_mg_cost_at_alpha_star",
    ]);
    for r in rows {
        let pi: Vec<String> = r.pi.iter().map(|p| crate::report::fmt_sig12(*p)).collect();
        t.push(vec![
            options.a.into(),
            options.d.into(),
            options.p_max.into(),
            options.q_max.into(),
            r.e_max.into(),
            Cell::Text(pi.join(" ")),
            r.single_mg_cost.into(),
            r.two_mg_cost_no_sharing.into(),
            r.alpha_star.into(),
            r.two_mg_cost_at_alpha_star.into(),
        ]);
    }
    t
}
