use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_oracle-frugal");

const SMALL: &str = r#"{
  "pac": {"epsilon": 0.45, "delta": 0.45},
  "tree": {"lambda": 0.01, "max_depth": 2},
  "env": {"kind": "synthetic", "n_features": 6},
  "run": {"seed": 5, "max_iterations": 120, "eval_every": 20, "eval_states": 100}
}
"#;

const BOXES: &str = r#"{
  "tree": {"max_depth": 2},
  "env": {"kind": "box_world", "columns": 3, "rows": 3},
  "run": {"seed": 1, "max_iterations": 40, "eval_every": 10, "eval_states": 50}
}
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn itrs_writes_manifest_and_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("run");
    let o = run(&["itrs", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "dataset.csv", "tree.txt", "log.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], "v0.1.0");
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["stop_reason"].is_string());
    assert_eq!(manifest["config"]["env"]["n_features"], 6);
    let dataset = fs::read_to_string(out.join("dataset.csv")).unwrap();
    let first = dataset.lines().nth(1).unwrap();
    let reward = first.rsplit(',').next().unwrap();
    // 17 significant digits in scientific notation
    assert_eq!(reward.split('e').next().unwrap().replace('.', "").len(), 17, "{reward}");
    assert!(fs::read_to_string(out.join("tree.txt")).unwrap().starts_with("osdt-tree v1\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let boxes = config(tmp.path(), "b.json", BOXES);
    for (cmd, cfg) in [(vec!["itrs"], &cfg), (vec!["baseline", "random"], &cfg), (vec!["baseline", "naive"], &boxes)] {
        let a = tmp.path().join(format!("{}-a", cmd.join("-")));
        let b = tmp.path().join(format!("{}-b", cmd.join("-")));
        for dir in [&a, &b] {
            let mut args = cmd.clone();
            args.extend(["--config", s(cfg), "--out-dir", s(dir)]);
            assert!(run(&args).status.success());
        }
        assert_eq!(files(&a), files(&b), "{cmd:?}");
    }
}

#[test]
fn paused_run_resumes_to_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let whole = tmp.path().join("whole");
    let parts = tmp.path().join("parts");
    assert!(run(&["baseline", "naive", "--config", s(&cfg), "--out-dir", s(&whole)]).status.success());
    let args = ["baseline", "naive", "--config", s(&cfg), "--out-dir", s(&parts), "--pause-after", "30"];
    assert!(run(&args).status.success());
    let manifest = fs::read_to_string(parts.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"stop_reason\": null"));
    let args = ["baseline", "naive", "--config", s(&cfg), "--out-dir", s(&parts), "--resume"];
    assert!(run(&args).status.success());
    assert_eq!(files(&whole), files(&parts));
}

#[test]
fn seed_and_budget_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("o");
    let o = run(&["itrs", "--config", s(&cfg), "--out-dir", s(&out), "--seed", "77", "--budget", "60"]);
    assert!(o.status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 77);
    assert_eq!(manifest["stop_reason"], "budget_exhausted");
    assert!(manifest["sim_calls"].as_u64().unwrap() <= 60);
}

#[test]
fn config_errors_exit_2_with_field_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = config(tmp.path(), "bad.json", "{\n  \"pac\": {\n    \"delta\": 1.5\n  }\n}\n");
    let o = run(&["itrs", "--config", s(&bad), "--out-dir", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:") && err.contains("pac.delta"), "{err}");

    let broken = config(tmp.path(), "broken.json", "{\n  \"run\": {\"seed\": }\n}\n");
    let o = run(&["baseline", "naive", "--config", s(&broken), "--out-dir", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.json:2:"));
}

#[test]
fn budget_below_bootstrap_exits_3_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("o");
    let o = run(&["itrs", "--config", s(&cfg), "--out-dir", s(&out), "--budget", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn nuse_demo_columns_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "n.json",
        r#"{"pac": {"epsilon": 0.35, "delta": 0.05}, "env": {"kind": "synthetic", "n_features": 50}, "run": {"seed": 2}}"#,
    );
    let out = tmp.path().join("n");
    assert!(run(&["nuse-demo", "--config", s(&cfg), "--out-dir", s(&out)]).status.success());
    let text = fs::read_to_string(out.join("nuse.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,leader_mean,max_radius,true_best_mean"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 10);
    let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert!(ts.windows(2).all(|w| w[1] == w[0] + 1.0), "one row per iteration");
    assert!(rows.iter().all(|r| r[3] == 0.9));
    let inside = rows.iter().filter(|r| (r[1] - r[3]).abs() <= r[2]).count();
    assert!(inside as f64 >= 0.95 * rows.len() as f64);

    let boxes = config(tmp.path(), "b.json", BOXES);
    let o = run(&["nuse-demo", "--config", s(&boxes), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_aggregates_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", SMALL);
    let a = tmp.path().join("a");
    assert!(run(&["itrs", "--config", s(&cfg), "--out-dir", s(&a), "--budget", "90"]).status.success());
    let rep = tmp.path().join("rep");
    assert!(run(&["report", "--out-dir", s(&rep), s(&a)]).status.success());
    let table = fs::read_to_string(rep.join("budget_accuracy.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,budget,accuracy,reward_capture,sim_calls");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("itrs,90,"));
    let sizes = fs::read_to_string(rep.join("accuracy_vs_size.csv")).unwrap();
    assert_eq!(sizes.lines().next(), Some("method,seed,dataset_size,sim_calls,accuracy"));

    let missing = tmp.path().join("nope");
    let o = run(&["report", "--out-dir", s(&rep), s(&a), s(&missing)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains(s(&missing)));
}
