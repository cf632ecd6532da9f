use std::path::Path;
use std::process::{Command, Output};

fn mlas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlas")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    let quick = "\n[fit]\nn_starts = 3\nmax_evals = 120\n\n[search]\ncandidates_per_dim = 100\nn_refine = 2\nrefine_evals = 40\n";
    std::fs::write(&path, format!("{body}{quick}")).unwrap();
    path.to_str().unwrap().to_string()
}

const BASE: &str = r#"
problem = "sine-quadratic-2d"
costs = [1.0, 8.0]
initial = [6, 3]
seeds = [0, 1]
grid_per_axis = 12
lhc_restarts = 10

[stopping]
iterations = 3
"#;

#[test]
fn missing_costs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("costs = [1.0, 8.0]\n", ""));
    let out = mlas(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("costs"), "{stderr}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn run_writes_logs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("a");
    let names = ["runlog_0.csv", "runlog_1.csv", "summary.json", "curve.csv", "level_counts.csv"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let out = mlas(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(names.map(|n| std::fs::read(out_dir.join(n)).unwrap()));
    }
    for (i, name) in names.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{name} differs");
    }
    let outs = [out_dir];
    let log = std::fs::read_to_string(outs[0].join("runlog_0.csv")).unwrap();
    assert!(log.starts_with("iteration,chosen_level,x1,x2,raw_pei,weighted_pei,cost_step,cost_cum,nrmse,exploration_flag"));
    assert_eq!(log.lines().count(), 5);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(outs[0].join("summary.json")).unwrap()).unwrap();
    assert!(summary.get("config").is_some());
}

#[test]
fn parallel_flag_gives_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mlas(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(mlas(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--parallel"]).status.success());
    for name in ["runlog_0.csv", "runlog_1.csv", "curve.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn sweep_writes_one_row_per_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let body = format!("out = {:?}\n{BASE}\n[sweep]\nratios = [1.0, 8.0, 100.0]\niterations = 3\n", out_dir.to_str().unwrap());
    let cfg = write_config(dir.path(), &body);
    let out = mlas(&["sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn empty_ratio_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}\n[sweep]\nratios = []\n"));
    let out = mlas(&["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ratios"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("colour = 3\n{BASE}"));
    let out = mlas(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_fails() {
    let out = mlas(&["run", "--config", "/nonexistent/exp.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("mlas:"));
}
