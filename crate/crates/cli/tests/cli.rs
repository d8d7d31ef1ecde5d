use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughmf"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = run(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn summary(dir: &Path, command: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn kernel_defaults_write_twenty_factors() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["kernel"]);
    let k: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("kernel_n20.json")).unwrap()).unwrap();
    let rates: Vec<f64> = k["rates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(rates.len(), 20);
    assert_eq!(k["weights"].as_array().unwrap().len(), 20);
    assert!(rates.windows(2).all(|w| w[0] < w[1]));
    let s = summary(dir.path(), "kernel");
    assert_eq!(s["config"]["model"]["lambda"], 0.3);
    assert_eq!(s["config"]["kernel"]["choice"], "uniform_optimal");
}

#[test]
fn kernel_sweep_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["kernel", "--set", "kernel.sweep=[10,20,50,100,500]"]);
    let rows = csv_rows(&dir.path().join("kernel_errors.csv"));
    assert_eq!(rows.len(), 5);
    for col in 1..5 {
        for w in rows.windows(2) {
            assert!(num(&w[1][col]) < num(&w[0][col]), "column {col}");
        }
    }
    for r in &rows {
        assert!(num(&r[1]) <= num(&r[3]) && num(&r[2]) <= num(&r[4]));
    }
}

#[test]
fn explicit_partition_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["kernel", "--set", "kernel.choice=f2_opt"]);
    let file = dir.path().join("kernel_n20.json");
    let again = dir.path().join("again");
    ok(
        &again,
        &[
            "kernel",
            "--set",
            "kernel.choice=explicit",
            "--set",
            &format!("kernel.partition_file={}", file.display()),
        ],
    );
    let a: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(again.join("kernel_n20.json")).unwrap()).unwrap();
    for key in ["etas", "weights", "rates", "l1_error", "l2_error"] {
        assert_eq!(a[key], b[key], "{key}");
    }
    assert_eq!(b["choice"], "explicit");
}

#[test]
fn riccati_errors() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "riccati.b_grid=[0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25,26,27,28,29,30]";
    ok(
        dir.path(),
        &["riccati", "--set", "riccati.factor_counts=[20,500]", "--set", grid],
    );
    let s = summary(dir.path(), "riccati");
    let max = &s["results"]["max_rel_err"];
    assert!(max[1]["max_rel_err"].as_f64().unwrap() < 0.03);
    assert_eq!(s["results"]["undefined_rel_err_at_b"], serde_json::json!([0.0, 0.0]));
    let rows = csv_rows(&dir.path().join("riccati_errors.csv"));
    assert_eq!(rows.len(), 62);
    assert_eq!(rows[0][2], "");

    let uniform = max[0]["max_rel_err"].as_f64().unwrap();
    let f2 = dir.path().join("f2");
    ok(
        &f2,
        &[
            "riccati",
            "--set",
            "riccati.factor_counts=[20]",
            "--set",
            "kernel.choice=f2_opt",
        ],
    );
    let optimized = summary(&f2, "riccati")["results"]["max_rel_err"][0]["max_rel_err"]
        .as_f64()
        .unwrap();
    assert!(optimized < uniform, "{optimized} vs {uniform}");
}

#[test]
fn smile_and_prices() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["smile"]);
    let rows = csv_rows(&dir.path().join("smile.csv"));
    assert_eq!(rows.len(), 17);
    let gap = summary(dir.path(), "smile")["results"]["atm_iv_gap"].as_f64().unwrap();
    assert!(gap.abs() < 0.005);
    ok(dir.path(), &["price", "--set", "pricing.k_grid=[-0.1,0,0.1]"]);
    let rows = csv_rows(&dir.path().join("prices.csv"));
    assert_eq!(rows.len(), 3);
    assert!(num(&rows[0][2]) > num(&rows[1][2]) && num(&rows[1][2]) > num(&rows[2][2]));
}

#[test]
fn zero_vol_of_vol_smile_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["smile", "--set", "model.nu=0", "--set", "pricing.n=20"]);
    let rows = csv_rows(&dir.path().join("smile.csv"));
    for col in [1, 2] {
        let ivs: Vec<f64> = rows.iter().map(|r| num(&r[col])).collect();
        let spread = ivs.iter().cloned().fold(f64::MIN, f64::max) - ivs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6, "column {col}: {spread}");
    }
}

#[test]
fn invalid_configurations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["smile", "--set", "pricing.k_grid=[]"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("k_grid"));
    let o = run(dir.path(), &["price", "--set", "model.volvol=1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown config key model.volvol"));
    let o = run(
        dir.path(),
        &[
            "kernel",
            "--set",
            "kernel.choice=explicit",
            "--set",
            "kernel.partition_file=/nonexistent.json",
        ],
    );
    assert!(!o.status.success());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"pricing": {"maturity": -1}}"#).unwrap();
    let o = run(dir.path(), &["price", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn config_file_is_merged_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.json");
    std::fs::write(
        &file,
        r#"{"model": {"rho": -0.5}, "pricing": {"k_grid": [0.0], "n": 20}}"#,
    )
    .unwrap();
    ok(dir.path(), &["price", "--config", file.to_str().unwrap()]);
    let s = summary(dir.path(), "price");
    assert_eq!(s["config"]["model"]["rho"], -0.5);
    assert_eq!(s["config"]["model"]["nu"], 0.3);
    assert_eq!(s["config"]["pricing"]["k_grid"], serde_json::json!([0.0]));
}

#[test]
fn simulation_is_reproducible_and_matches_fourier() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&a, &["simulate", "--threads", "1"]);
    ok(&b, &["simulate", "--threads", "3"]);
    let pa = std::fs::read(a.join("paths.csv")).unwrap();
    assert_eq!(pa, std::fs::read(b.join("paths.csv")).unwrap());
    assert_eq!(pa.iter().filter(|&&c| c == b'\n').count(), 10_001);
    let s = summary(&a, "simulate");
    for p in s["results"]["prices"].as_array().unwrap() {
        assert!(p["z_score"].as_f64().unwrap().abs() < 3.0, "{p}");
    }
    assert!(s["results"]["terminal_spot"]["z_score"].as_f64().unwrap().abs() < 3.0);
}

#[test]
fn noiseless_simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--set",
            "model.nu=0",
            "--set",
            "model.lambda=0",
            "--set",
            "simulation.config.n_paths=100",
        ],
    );
    let rv = &summary(dir.path(), "simulate")["results"]["realized_variance"];
    assert!(rv["std_error"].as_f64().unwrap() < 1e-15);
    assert!(rv["z_score"].is_null());
    let (mean, exact) = (rv["mean"].as_f64().unwrap(), rv["exact"].as_f64().unwrap());
    assert!((mean - exact).abs() < 1e-4 * exact, "{mean} vs {exact}");
}

#[test]
fn bench_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "bench",
            "--set",
            "bench.steps=[200,400]",
            "--set",
            "bench.factors=[100,500]",
            "--set",
            "bench.batches=1",
            "--set",
            "bench.min_batch_seconds=0.005",
        ],
    );
    assert_eq!(csv_rows(&dir.path().join("bench.csv")).len(), 6);
    assert_eq!(
        summary(dir.path(), "bench")["results"]["ratios"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
}
