use rayon::prelude::*;

use super::{mean_and_sd, run_simulation, SimOptions, SimReport, Trace};
use crate::control::Controller;
use crate::error::Result;
use crate::scenario::{substream, ExperimentConfig, StreamPurpose};

/// Independent replications of one experiment.
#[derive(Debug, Clone)]
pub struct ReplicationSet {
    /// In replication order.
    pub runs: Vec<SimReport>,
    pub traces: Vec<Trace>,
    /// Mean of the per-run steady-state normalized cost.
    pub mean_cost: f64,
    /// Standard error across runs; for a single run, its batch-means error.
    pub standard_error: f64,
}

/// Runs `config.replications` snapshots, each with its own geometry,
/// arrival, and controller streams. Runs execute in parallel on the current
/// rayon pool; results do not depend on the thread count.
pub fn run_replications(config: &ExperimentConfig, options: &SimOptions) -> Result<ReplicationSet> {
    config.validate()?;
    let digest = config.digest();
    let options = SimOptions {
        burn_in_fraction: config.burn_in_fraction,
        ..options.clone()
    };
    let results: Vec<Result<(SimReport, Option<Trace>)>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let scenario = config
                .scenario
                .instantiate(&mut substream(config.seed, r, StreamPurpose::Geometry))?;
            let mut controller = Controller::from_spec(
                &config.controller,
                &scenario,
                substream(config.seed, r, StreamPurpose::Controller),
            )?;
            let mut arrivals = substream(config.seed, r, StreamPurpose::Arrivals);
            let run = run_simulation(&scenario, &mut controller, config.horizon_slots, &mut arrivals, &options)?;
            let mut report = run.report;
            report.replication = r;
            report.seed = config.seed;
            report.config_digest = digest.clone();
            Ok((report, run.trace))
        })
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for result in results {
        let (report, trace) = result?;
        runs.push(report);
        traces.extend(trace);
    }
    let costs: Vec<f64> = runs.iter().map(|r| r.steady_state_cost).collect();
    let (mean_cost, sd) = mean_and_sd(&costs);
    let standard_error = if runs.len() == 1 {
        runs[0].standard_error
    } else {
        sd / (runs.len() as f64).sqrt()
    };
    Ok(ReplicationSet {
        runs,
        traces,
        mean_cost,
        standard_error,
    })
}
