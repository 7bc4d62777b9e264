//! Command-line surface: exit codes, config parsing, run directories and
//! output formats.

use spde::cli::{load_run, run_with, RunMetadata};
use spde::simulate::binary::{read_array, MAGIC};
use spde::simulate::SimConfig;
use std::path::Path;
use std::process::Command;

fn spde(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["spde"];
    full.extend_from_slice(args);
    let code = run_with(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn small_config() -> SimConfig {
    SimConfig {
        n_space: 16,
        dt: 1e-3,
        t_end: 0.05,
        trajectories: 40,
        output_times: vec![0.025, 0.05],
        probes: vec![vec![0.25], vec![0.5]],
        ..SimConfig::desk_default()
    }
}

fn write_config(dir: &Path, cfg: &SimConfig) -> String {
    let path = dir.join("sim.json");
    std::fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eig_reports_pi_squared() {
    let (code, out) = spde(&["eig", "--domain", r#"{"kind":"Interval","L":1.0}"#, "--bc", "dirichlet", "--modes", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let mu1 = v["mu1"].as_f64().unwrap();
    assert!((mu1 - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    assert_eq!(v["mu"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes_follow_error_class() {
    let bin = env!("CARGO_BIN_EXE_spde");
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.json");
    let mut v = serde_json::to_value(small_config()).unwrap();
    v["lambda"] = serde_json::json!("one");
    std::fs::write(&bad, v.to_string()).unwrap();
    let o = Command::new(bin).args(["simulate", "--config", bad.to_str().unwrap(), "--out", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at `lambda`"), "{}", String::from_utf8_lossy(&o.stderr));

    let mut v = serde_json::to_value(small_config()).unwrap();
    v["extra"] = serde_json::json!(1);
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, v.to_string()).unwrap();
    let o = Command::new(bin).args(["simulate", "--config", unknown.to_str().unwrap(), "--out", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));

    let o = Command::new(bin).args(["series", "--rho", "0.5", "--lambda", "1", "--t-grid", "0.1", "--n", "60"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(bin).arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn simulate_round_trips_through_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let config = write_config(dir.path(), &cfg);
    let run = dir.path().join("run");
    let (code, _) = spde(&["simulate", "--config", &config, "--out", run.to_str().unwrap()]);
    assert_eq!(code, 0);

    let meta: RunMetadata = serde_json::from_str(&std::fs::read_to_string(run.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta.config, cfg);
    assert_eq!(meta.trajectories, 40);

    let ens = load_run(&run).unwrap();
    assert_eq!(ens.times, cfg.output_times);
    assert_eq!(ens.probe_values.len(), 2);
    assert_eq!(ens.probe_values[1].shape(), (40, 2));

    let bytes = std::fs::read(run.join("probes.bin")).unwrap();
    assert_eq!(&bytes[..4], MAGIC);
    let arr = read_array(&bytes[..]).unwrap();
    assert_eq!(arr.dims, vec![2, 40, 2]);
    assert_eq!(arr.values[40 * 2 + 1], ens.probe_values[1][(0, 1)]);

    let csv = std::fs::read_to_string(run.join("probes.csv")).unwrap();
    assert!(csv.starts_with("time,probe,x,mean,se,m2,m2_se\r\n"));
    assert_eq!(csv.matches("\r\n").count(), 1 + 2 * 2);

    let (code, out) = spde(&["estimate", "--runs", run.to_str().unwrap(), "--what", "moments", "--t", "0.05"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3, "{out}");
}
