use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mgcoop(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgcoop"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const CONFIG: &str = r#"{
  "seed": 5,
  "horizon_slots": 300,
  "replications": 2,
  "scenario": {
    "n_mgs": 2,
    "geometry": { "kind": "random_farm" },
    "pricing": { "kind": "distance", "beta_per_km": 1.0 },
    "e_max_mwh": 5.0,
    "y_max_mwh": 1.0,
    "b_s_max_mwh": 1.0,
    "b_ex_max_mwh": 10.0,
    "arrival": { "kind": "truncated_normal", "sigma_mw": 3.0, "lower_mw": -10.0, "upper_mw": 10.0 }
  },
  "controller": { "kind": "lyapunov" }
}"#;

#[test]
fn analytic_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = mgcoop(&["analytic", "--q-max", "1", "--e-max", "50"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("analytic.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    let cost_col = header.iter().position(|h| h == "single_mg_cost").unwrap();
    let costs: Vec<f64> = reader.records().map(|r| r.unwrap()[cost_col].parse().unwrap()).collect();
    assert_eq!(costs.len(), 51);
    assert_eq!(costs[0], 0.5);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn sharing_is_total_without_storage() {
    let dir = tempfile::tempdir().unwrap();
    let o = mgcoop(&["analytic", "--e-max", "0", "--p-max", "1", "--q-max", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("analytic.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let k = reader.headers().unwrap().iter().position(|h| h == "alpha_star").unwrap();
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[k], "1");
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = mgcoop(&["simulate", "--trace", "--config", config.to_str().unwrap()], &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            fs::read(out.join("summary.csv")).unwrap(),
            fs::read(out.join("trace_1.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);

    let out = dir.path().join("c");
    let o = mgcoop(&["simulate", "--seed", "6", "--config", config.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(out.join("summary.csv")).unwrap(), outputs[0].0);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let o = mgcoop(
        &["sweep", "--config", config.to_str().unwrap(), "--param", "e-max", "--values", "3,5,8"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("e_max_mwh,3,"));
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, CONFIG.replace("\"seed\": 5,", "")).unwrap();
    assert_eq!(code(&mgcoop(&["simulate", "--config", config.to_str().unwrap()], dir.path())), 1);
    fs::write(&config, CONFIG.replace("\"e_max_mwh\": 5.0", "\"e_max_mwh\": 1.0")).unwrap();
    assert_eq!(code(&mgcoop(&["simulate", "--config", config.to_str().unwrap()], dir.path())), 1);
    assert_eq!(code(&mgcoop(&["simulate"], dir.path())), 1);
}

#[test]
fn zero_target_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let options = dir.path().join("fig6.json");
    fs::write(&options, r#"{ "snapshots": 2, "horizon_slots": 200, "n_mgs": [1, 2], "search": { "max_e_max_mwh": 4.0 } }"#)
        .unwrap();
    let o = mgcoop(&["fig6", "--target", "0", "--config", options.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3);
    let text = fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
    assert_eq!(text.matches("unreachable").count(), 2);
}

#[test]
fn fig4_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(code(&mgcoop(&["fig4", "--horizon", "3000"], out)), 0);
    }
    assert_eq!(fs::read(a.join("fig4.csv")).unwrap(), fs::read(b.join("fig4.csv")).unwrap());
}

#[test]
fn selftest_catches_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = mgcoop(&["selftest", "--inject-fault", "battery-off-by-one"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
}
