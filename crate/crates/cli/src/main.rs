use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use mgcoop::experiments::{
    analytic, analytic_table, fig4, fig4_table, fig5, fig5_table, fig6, fig6_probe_table, fig6_table, AnalyticOptions,
    Fig4Options, Fig5Options, Fig6Options,
};
use mgcoop::report::{summary_table, trace_table, Table};
use mgcoop::scenario::{load_config, ControllerSpec, ExperimentConfig};
use mgcoop::selftest::{run_selftest, SelftestOptions};
use mgcoop::sim::{run_replications, Fault, SimOptions};
use mgcoop::Error;

/// Microgrid storage and cooperation experiments.
#[derive(Debug, Parser)]
#[command(name = "mgcoop", version)]
struct Cli {
    /// JSON config; its schema depends on the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// 100 snapshots of 5000 slots instead of 20 of 2000.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Also write slot-level traces.
    #[arg(long, global = true)]
    trace: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print less.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary laws, single-MG cost, and optimal two-MG sharing.
    Analytic {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        p_max: Option<f64>,
        #[arg(long)]
        q_max: Option<f64>,
        /// Largest capacity; rows run from 0 up to it.
        #[arg(long)]
        e_max: Option<usize>,
    },
    /// Run the experiment described by `--config`.
    Simulate,
    /// Vary one parameter of the `--config` experiment.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Cost versus battery capacity, analytic and simulated.
    Fig4 {
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Normalized cost versus number of cooperating MGs.
    Fig5,
    /// Storage needed to reach a cost target versus number of MGs.
    Fig6 {
        #[arg(long)]
        target: Option<f64>,
    },
    /// Oracle checks and invariant runs.
    Selftest {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    EMax,
    V,
    NMgs,
    Alpha,
}

impl SweepParam {
    fn label(self) -> &'static str {
        match self {
            SweepParam::EMax => "e_max_mwh",
            SweepParam::V => "v",
            SweepParam::NMgs => "n_mgs",
            SweepParam::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    BatteryOffByOne,
    WrongTheta,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: cannot size thread pool: {err}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant { .. } | Error::Solver(_) => 2,
        Error::Unreachable { .. } => 3,
        _ => 1,
    }
}

fn read_options<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::validation("--config", "this subcommand needs an experiment config"))?;
    let mut config = load_config(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write(cli: &Cli, name: &str, table: &Table) -> Result<(), Error> {
    let path = cli.out.join(name);
    table.write(&path)?;
    if !cli.quiet {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Analytic { a, d, p_max, q_max, e_max } => {
            let mut options: AnalyticOptions = read_options(cli.config.as_deref())?;
            options.a = a.unwrap_or(options.a);
            options.d = d.unwrap_or(options.d);
            options.p_max = p_max.unwrap_or(options.p_max);
            options.q_max = q_max.unwrap_or(options.q_max);
            if let Some(e) = e_max {
                options.e_max = (0..=*e).collect();
            }
            let rows = analytic(&options)?;
            if !cli.quiet {
                for r in &rows {
                    println!(
                        "e_max {:>4}  single {:.6}  two-MG alpha* {:.4} cost {:.6}",
                        r.e_max, r.single_mg_cost, r.alpha_star, r.two_mg_cost_at_alpha_star
                    );
                }
            }
            write(cli, "analytic.csv", &analytic_table(&options, &rows))?;
        }
        Command::Simulate => {
            let config = experiment_config(cli)?;
            let options = SimOptions {
                record_trace: cli.trace,
                ..SimOptions::default()
            };
            let set = run_replications(&config, &options)?;
            if !cli.quiet {
                println!(
                    "{} replications x {} slots: normalized cost {:.6} +/- {:.6}",
                    set.runs.len(),
                    config.horizon_slots,
                    set.mean_cost,
                    set.standard_error
                );
            }
            write(cli, "summary.csv", &summary_table(&set.runs))?;
            for (k, trace) in set.traces.iter().enumerate() {
                write(cli, &format!("trace_{k}.csv"), &trace_table(trace))?;
            }
        }
        Command::Sweep { param, values } => {
            let base = experiment_config(cli)?;
            let mut table = Table::new(&["parameter", "value", "normalized_cost", "standard_error", "replications"]);
            for &value in values {
                let config = swept(&base, *param, value)?;
                let set = run_replications(&config, &SimOptions::default())?;
                if !cli.quiet {
                    println!("{} = {value}: {:.6} +/- {:.6}", param.label(), set.mean_cost, set.standard_error);
                }
                table.push(vec![
                    param.label().into(),
                    value.into(),
                    set.mean_cost.into(),
                    set.standard_error.into(),
                    set.runs.len().into(),
                ]);
            }
            write(cli, "sweep.csv", &table)?;
        }
        Command::Fig4 { horizon } => {
            let mut options: Fig4Options = read_options(cli.config.as_deref())?;
            options.seed = cli.seed.unwrap_or(options.seed);
            if let Some(h) = horizon {
                options.horizon_slots = *h;
            }
            let rows = fig4(&options)?;
            if !cli.quiet {
                for r in &rows {
                    println!(
                        "e_max {:>3}  analytic {:.5}  simulated {:.5} +/- {:.5}",
                        r.e_max_mwh, r.analytic_cost, r.simulated_cost, r.standard_error
                    );
                }
            }
            write(cli, "fig4.csv", &fig4_table(&rows))?;
        }
        Command::Fig5 => {
            let mut options: Fig5Options = read_options(cli.config.as_deref())?;
            options.seed = cli.seed.unwrap_or(options.seed);
            if cli.paper_scale {
                let full = Fig5Options::full_scale();
                options.snapshots = full.snapshots;
                options.horizon_slots = full.horizon_slots;
            }
            let rows = fig5(&options)?;
            if !cli.quiet {
                for r in &rows {
                    println!(
                        "e_max {:>4}  N {}  cost {:.5} +/- {:.5}",
                        r.e_max_mwh, r.n_mgs, r.mean_cost, r.standard_error
                    );
                }
            }
            write(cli, "fig5.csv", &fig5_table(&rows))?;
        }
        Command::Fig6 { target } => {
            let mut options: Fig6Options = read_options(cli.config.as_deref())?;
            options.seed = cli.seed.unwrap_or(options.seed);
            options.target = target.unwrap_or(options.target);
            if cli.paper_scale {
                let full = Fig6Options::full_scale();
                options.snapshots = full.snapshots;
                options.horizon_slots = full.horizon_slots;
            }
            let rows = fig6(&options)?;
            if !cli.quiet {
                for r in &rows {
                    match r.required_e_max_mwh {
                        Some(e) => println!("N {}  required e_max {e} MWh", r.n_mgs),
                        None => println!("N {}  target {} unreachable", r.n_mgs, r.target),
                    }
                }
            }
            write(cli, "fig6.csv", &fig6_table(&rows))?;
            write(cli, "fig6_probes.csv", &fig6_probe_table(&rows))?;
            if rows.iter().any(|r| r.required_e_max_mwh.is_none()) {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Selftest { inject_fault } => {
            let options = SelftestOptions {
                seed: cli.seed.unwrap_or(SelftestOptions::default().seed),
                fault: inject_fault.map(|f| match f {
                    FaultArg::BatteryOffByOne => Fault::BatteryOffByOne,
                    FaultArg::WrongTheta => Fault::WrongTheta,
                }),
                ..SelftestOptions::default()
            };
            let results = run_selftest(&options);
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} checks, {failed} failed", results.len());
            if failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn swept(base: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig, Error> {
    let mut config = base.clone();
    match param {
        SweepParam::EMax => {
            // Keep the charge and discharge limits, move only the capacity.
            config.scenario.e_max_mwh = value;
            config.scenario.initial_energy_mwh = config.scenario.initial_energy_mwh.min(value);
        }
        SweepParam::V => config.controller = ControllerSpec::Lyapunov { v: Some(value) },
        SweepParam::NMgs => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::validation("n_mgs", format!("must be a positive integer, got {value}")));
            }
            config.scenario.n_mgs = value as usize;
        }
        SweepParam::Alpha => config.controller = ControllerSpec::AlphaPolicy { alpha: value },
    }
    config.validate()?;
    Ok(config)
}
