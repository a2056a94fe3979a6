//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero if a criterion fails that is not listed in `KNOWN_FAILING`.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mgcoop::analytics::{
    birth_death_closed_form, build_transition_matrix, optimize_alpha, stationary_distribution, ExcessPmf, Storage,
    TwoMgPolicy,
};
use mgcoop::control::LyapunovParams;
use mgcoop::experiments::{
    clipped_walk_check, fig4, fig4_table, fig5, fig5_table, fig6, fig6_probe_table, fig6_table, walk_table,
    Fig4Options, Fig5Options, Fig6Options,
};
use mgcoop::report::Table;
use mgcoop::scenario::{substream, StreamPurpose};
use mgcoop::selftest::{compare_with_oracle, random_scenario, random_slot_problem};
use mgcoop::sim::{check_drift_bound, run_simulation, SimOptions};
use mgcoop::control::Controller;

const SEED: u64 = 2024;

/// Criteria whose measured outcome is a failure under the implemented
/// model. They are still run and reported; the run fails if one of them
/// starts passing, so this list cannot go stale silently.
const KNOWN_FAILING: &[&str] = &["8b"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: &'static str, title: &'static str, limit: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    if !in_time {
        let _ = write!(detail, "; over the {:.0} s limit", limit.as_secs_f64());
    }
    Outcome {
        id,
        title,
        passed: ok && in_time,
        detail,
        elapsed,
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn closed_form_stationary() -> (bool, String) {
    let levels = [0.1, 0.2, 0.3, 0.5];
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for &a in &levels {
        for &d in &levels {
            if a == d {
                continue;
            }
            for &e in &[1usize, 2, 5, 10, 50] {
                let pmf = ExcessPmf::three_point(a, d).unwrap();
                let numeric = stationary_distribution(&build_transition_matrix(&pmf, e)).unwrap();
                let closed = birth_death_closed_form(a, d, e).unwrap();
                worst = numeric.iter().zip(&closed).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
                cases += 1;
            }
        }
    }
    (worst <= 1e-10, format!("{cases} cases, max abs error {worst:.2e}"))
}

fn walk_rows() -> Table {
    walk_table(&clipped_walk_check(0.2, 0.5, 1.0, &[0, 1, 2, 5, 10], 1_000_000, SEED).unwrap())
}

fn single_mg_walk(table: &Table) -> (bool, String) {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for row in &table.rows {
        let (e, closed, sim) = match (&row[0], &row[1], &row[2]) {
            (mgcoop::report::Cell::Int(e), mgcoop::report::Cell::Float(c), mgcoop::report::Cell::Float(s)) => (*e, *c, *s),
            _ => unreachable!("walk table layout"),
        };
        let rel = (sim - closed).abs() / closed;
        worst = worst.max(rel);
        parts.push(format!("e={e}: {rel:.2}%", rel = 100.0 * rel));
    }
    (worst <= 0.02, format!("max rel error {:.3}% ({})", 100.0 * worst, parts.join(", ")))
}

fn fig4_options() -> Fig4Options {
    Fig4Options {
        seed: SEED,
        horizon_slots: 50_000,
        ..Fig4Options::default()
    }
}

fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn fig4_agreement() -> (bool, String, Table) {
    let rows = fig4(&fig4_options()).unwrap();
    let worst = rows
        .iter()
        .map(|r| (r.simulated_cost - r.analytic_cost).abs() / r.analytic_cost)
        .fold(0.0_f64, f64::max);
    let analytic: Vec<f64> = rows.iter().map(|r| r.analytic_cost).collect();
    let simulated: Vec<f64> = rows.iter().map(|r| r.simulated_cost).collect();
    let mono_a = non_increasing(&analytic, 1e-12);
    let mono_s = non_increasing(&simulated, 1e-12);
    (
        worst <= 0.10 && mono_a && mono_s,
        format!(
            "{} capacities, max rel gap {:.2}%, analytic monotone {mono_a}, simulated monotone {mono_s}",
            rows.len(),
            100.0 * worst
        ),
        fig4_table(&rows),
    )
}

fn solver_exactness() -> (bool, String) {
    let mut rng = substream(SEED, 0, StreamPurpose::Arrivals);
    let mut worse = 0;
    let mut infeasible = 0;
    let mut max_gain = 0.0_f64;
    for _ in 0..1000 {
        let gap = compare_with_oracle(&random_slot_problem(&mut rng)).unwrap();
        if gap.solver > gap.oracle + gap.allowance {
            worse += 1;
        }
        if gap.infeasibility > 1e-9 {
            infeasible += 1;
        }
        max_gain = max_gain.max(gap.oracle - gap.solver);
    }
    (
        worse == 0 && infeasible == 0,
        format!("1000 instances, {worse} above oracle bound, {infeasible} infeasible, best gain over grid {max_gain:.3e}"),
    )
}

struct InvariantSummary {
    errors: Vec<String>,
    bound_violations: usize,
    drift_failures: usize,
    min_slack: f64,
    slots: usize,
}

fn invariant_runs() -> InvariantSummary {
    let mut s = InvariantSummary {
        errors: Vec::new(),
        bound_violations: 0,
        drift_failures: 0,
        min_slack: f64::INFINITY,
        slots: 0,
    };
    let options = SimOptions {
        record_trace: true,
        ..SimOptions::default()
    };
    for k in 0..50u64 {
        let scenario = random_scenario(&mut substream(SEED, k, StreamPurpose::Geometry));
        let params = LyapunovParams::for_scenario(&scenario, None).unwrap();
        let mut controller = Controller::Lyapunov(params);
        let mut arrivals = substream(SEED, k, StreamPurpose::Arrivals);
        match run_simulation(&scenario, &mut controller, 100_000, &mut arrivals, &options) {
            Ok(run) => {
                let trace = run.trace.expect("trace requested");
                let caps = trace.caps;
                s.slots += trace.records.len();
                s.bound_violations += run.report.violations;
                for rec in &trace.records {
                    for i in 0..rec.energy.len() {
                        let e = rec.energy[i];
                        let bad_charge = e > caps.e_max_mwh - caps.y_max_mwh && rec.charge[i] > 0.0;
                        let bad_discharge = e < caps.b_s_max_mwh && rec.self_discharge[i] > 0.0;
                        let out_of_range = !(0.0..=caps.e_max_mwh).contains(&e);
                        if bad_charge || bad_discharge || out_of_range {
                            s.bound_violations += 1;
                        }
                    }
                }
                let check = check_drift_bound(&trace, params.theta);
                s.min_slack = s.min_slack.min(check.worst_slack);
                if !check.passed {
                    s.drift_failures += 1;
                }
            }
            Err(err) => s.errors.push(format!("config {k}: {err}")),
        }
    }
    s
}

fn two_mg_extremes() -> (bool, String) {
    let family = |storage| TwoMgPolicy {
        alpha: 0.0,
        a: 0.2,
        d: 0.5,
        storage,
        p_max: 1.0,
        q_max: 3.0,
    };
    let (no_storage, _) = optimize_alpha(&family(Storage::Finite(0))).unwrap();
    let (huge_storage, _) = optimize_alpha(&family(Storage::Finite(10_000))).unwrap();
    (
        no_storage == 1.0 && huge_storage <= 1e-3,
        format!("alpha* = {no_storage} without storage, {huge_storage:.2e} at e_max = 10^4"),
    )
}

fn fig5_options() -> Fig5Options {
    Fig5Options {
        seed: SEED,
        capacities_mwh: vec![(2.0, 0.5), (50.0, 10.0)],
        ..Fig5Options::desk()
    }
}

fn fig5_trends(table: &Table) -> ((bool, String), (bool, String)) {
    let cost = table.column("normalized_cost").unwrap();
    let se = table.column("standard_error").unwrap();
    let e_col = table.column("e_max_mwh").unwrap();
    let pick = |e: f64| -> (Vec<f64>, Vec<f64>) {
        let mut c = Vec::new();
        let mut s = Vec::new();
        for k in 0..cost.len() {
            if *e_col[k] == mgcoop::report::Cell::Float(e) {
                if let (mgcoop::report::Cell::Float(x), mgcoop::report::Cell::Float(y)) = (cost[k], se[k]) {
                    c.push(*x);
                    s.push(*y);
                }
            }
        }
        (c, s)
    };
    let (small, small_se) = pick(2.0);
    let (large, _) = pick(50.0);
    let last = small.len() - 1;
    let drop = small[0] - small[last];
    let pooled = (small_se[0].powi(2) + small_se[last].powi(2)).sqrt();
    let decreasing = small.windows(2).all(|w| w[1] < w[0]);
    let small_ok = decreasing && drop > 2.0 * pooled;
    let rel_drop = (large[0] - large[large.len() - 1]) / large[0];
    (
        (
            small_ok,
            format!(
                "e_max=2: cost {:.3} -> {:.3}, drop {:.2} pooled SE, strictly decreasing {decreasing}",
                small[0],
                small[last],
                drop / pooled
            ),
        ),
        (
            rel_drop < 0.05,
            format!(
                "e_max=50: cost {:.3} -> {:.3}, relative drop {:.1}% (bound 5%)",
                large[0],
                large[large.len() - 1],
                100.0 * rel_drop
            ),
        ),
    )
}

fn fig6_run(target: Option<f64>) -> (Table, Table, Vec<Option<f64>>) {
    let mut options = Fig6Options {
        seed: SEED,
        ..Fig6Options::desk()
    };
    if let Some(t) = target {
        options.target = t;
    }
    let rows = fig6(&options).unwrap();
    let required = rows.iter().map(|r| r.required_e_max_mwh).collect();
    (fig6_table(&rows), fig6_probe_table(&rows), required)
}

fn fig6_trend(required: &[Option<f64>]) -> (bool, String) {
    let step = Fig6Options::desk().search.resolution_mwh;
    let values: Option<Vec<f64>> = required.iter().copied().collect();
    let shown: Vec<String> = required
        .iter()
        .map(|r| r.map_or("unreachable".to_string(), |e| format!("{e}")))
        .collect();
    let ok = values.is_some_and(|v| non_increasing(&v, step));
    (ok, format!("required e_max for N = 1, 2, 3, 5: {}", shown.join(", ")))
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();

    outcomes.push(timed("1", "closed-form stationary law", secs(1), closed_form_stationary));

    let mut walk = None;
    outcomes.push(timed("2", "single-MG clipped walk vs closed form", secs(30), || {
        let t = walk_rows();
        let r = single_mg_walk(&t);
        walk = Some(t);
        r
    }));

    let mut fig4_csv = None;
    outcomes.push(timed("3", "cost vs capacity, simulated vs analytic", secs(120), || {
        let (ok, detail, t) = fig4_agreement();
        fig4_csv = Some(t.to_csv());
        (ok, detail)
    }));

    outcomes.push(timed("4", "slot solver vs brute force", secs(120), solver_exactness));

    let start = Instant::now();
    let inv = invariant_runs();
    let inv_elapsed = start.elapsed();
    let inv_in_time = inv_elapsed <= secs(300);
    let time_note = if inv_in_time { "" } else { "; over the 300 s limit" };
    outcomes.push(Outcome {
        id: "5",
        title: "battery guarantees on random configs",
        passed: inv.errors.is_empty() && inv.bound_violations == 0 && inv_in_time,
        detail: if inv.errors.is_empty() {
            format!("50 configs, {} slots, {} violations{time_note}", inv.slots, inv.bound_violations)
        } else {
            inv.errors.join("; ")
        },
        elapsed: inv_elapsed,
    });
    outcomes.push(Outcome {
        id: "6",
        title: "pathwise drift bound",
        passed: inv.errors.is_empty() && inv.drift_failures == 0,
        detail: format!(
            "{} of {} traces fail, min slack {:.3e}",
            inv.drift_failures,
            50 - inv.errors.len(),
            inv.min_slack
        ),
        elapsed: Duration::ZERO,
    });

    outcomes.push(timed("7", "two-MG sharing extremes", secs(1), two_mg_extremes));

    let start = Instant::now();
    let fig5_t = fig5_table(&fig5(&fig5_options()).unwrap());
    let fig5_elapsed = start.elapsed();
    let (small, large) = fig5_trends(&fig5_t);
    let fig5_in_time = fig5_elapsed <= secs(600);
    outcomes.push(Outcome {
        id: "8a",
        title: "cooperation helps with small storage",
        passed: small.0 && fig5_in_time,
        detail: small.1,
        elapsed: fig5_elapsed,
    });
    outcomes.push(Outcome {
        id: "8b",
        title: "cooperation flat with large storage",
        passed: large.0 && fig5_in_time,
        detail: large.1,
        elapsed: Duration::ZERO,
    });

    let mut fig6_csv = None;
    outcomes.push(timed("9", "storage requirement vs N", secs(900), || {
        let (table, probes, required) = fig6_run(None);
        fig6_csv = Some(table.to_csv() + &probes.to_csv());
        fig6_trend(&required)
    }));

    outcomes.push(timed("10", "byte-identical reruns", secs(900), || {
        let mut same = Vec::new();
        same.push(("walk", walk.as_ref().map(Table::to_csv) == Some(walk_rows().to_csv())));
        same.push(("fig4", fig4_csv.as_deref() == Some(fig4_agreement().2.to_csv().as_str())));
        same.push(("fig5", fig5_t.to_csv() == fig5_table(&fig5(&fig5_options()).unwrap()).to_csv()));
        let (t, p, _) = fig6_run(None);
        same.push(("fig6", fig6_csv.as_deref() == Some((t.to_csv() + &p.to_csv()).as_str())));
        let differ: Vec<&str> = same.iter().filter(|(_, s)| !s).map(|(n, _)| *n).collect();
        (
            differ.is_empty(),
            if differ.is_empty() {
                format!("{} CSV outputs identical", same.len())
            } else {
                format!("differ: {}", differ.join(", "))
            },
        )
    }));

    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_FAILING.contains(&o.id);
        let tag = match (o.passed, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (listed as known failing)",
        };
        if o.passed == known {
            unexpected += 1;
        }
        println!(
            "criterion {:<3} {:<14} {:<42} {:>7.2} s  {}",
            o.id,
            tag,
            o.title,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }

    // Targets well below the default show the trend the default target cannot.
    for target in [1.0, 0.5] {
        let (_, _, required) = fig6_run(Some(target));
        println!("info          storage requirement at target {target}: {}", fig6_trend(&required).1);
    }

    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria with unexpected outcome");
        ExitCode::FAILURE
    }
}
