//! Black-box tests of the gglearn binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gglearn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gglearn-cli-{tag}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_batch_csv(path: &PathBuf, header: &str, rows: &[Vec<f64>]) {
    let mut text = format!("{header}\n");
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn correlated_rows(m: usize) -> Vec<Vec<f64>> {
    // deterministic pseudo-data: x from a fixed LCG, y and z linearly related
    let mut state = 12345u64;
    let mut unit = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..m)
        .map(|_| {
            let x = unit() + unit() + unit();
            let z = x + 0.3 * (unit() + unit() + unit());
            let y = z + 0.3 * (unit() + unit() + unit());
            vec![x, y, z]
        })
        .collect()
}

#[test]
fn usage_error_exits_2() {
    let out = run(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_file_is_runtime_error_1() {
    let out = run(&["estimate-mi", "--input", "/nonexistent/batch.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn estimate_and_test_mi() {
    let dir = tmpdir("mi");
    let path = dir.join("batch.csv");
    write_batch_csv(&path, "x,y,z", &correlated_rows(2000));

    let out = run(&["estimate-mi", "--input", path.to_str().unwrap(), "--cols", "x,z"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["i_hat"].as_f64().unwrap() > 0.5);
    assert_eq!(v["m"].as_u64().unwrap(), 2000);

    let out = run(&["test-mi", "--input", path.to_str().unwrap(), "--cols", "x,z", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["decision"].as_str().unwrap(), "dependent");
    assert!(v["threshold"].as_f64().unwrap() > 0.0);

    // x and y are conditionally independent given z
    let out = run(&["test-cmi", "--input", path.to_str().unwrap(), "--cols", "x,y,z", "--eps", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["decision"].as_str().unwrap(), "independent");
}

#[test]
fn chow_liu_learns_chain() {
    let dir = tmpdir("cl");
    let path = dir.join("batch.csv");
    write_batch_csv(&path, "x,y,z", &correlated_rows(5000));
    let out_path = dir.join("tree.json");

    let out = run(&["chow-liu", "--input", path.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let edges: Vec<(usize, usize)> =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    // x - z - y chain
    assert_eq!(edges, vec![(0, 2), (1, 2)]);
}

#[test]
fn gen_instance_writes_expected_covariance() {
    let dir = tmpdir("gen");
    let path = dir.join("inst.json");
    let out = run(&[
        "gen-instance", "--kind", "realizable", "--eps", "0.1", "--n", "1", "--seed", "7",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["kind"], "realizable");
    let cov = v["cov"].as_array().unwrap();
    let r = 0.1f64.sqrt();
    let expect = [
        [1.0, 0.0, r],
        [0.0, 2.0, 1.0],
        [r, 1.0, 2.1],
    ];
    for i in 0..3 {
        for j in 0..3 {
            let got = cov[i].as_array().unwrap()[j].as_f64().unwrap();
            assert!((got - expect[i][j]).abs() < 1e-12, "cov[{i}][{j}]={got}");
        }
    }
}

#[test]
fn exp_eps_vs_m_emits_csv_with_metadata() {
    let dir = tmpdir("eps");
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "seed": 11,
            "trials": 40,
            "success_threshold": 0.95,
            "kl_tolerance_factor": 0.25,
            "m_max": 1 << 22,
            "epsilons": [0.3, 0.2]
        })
        .to_string(),
    )
    .unwrap();
    let out_path = dir.join("run.csv");
    let out = run(&[
        "exp", "eps-vs-m", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# seed=11 config_hash="));
    assert_eq!(lines.next().unwrap(), "epsilon,m_star");
    assert_eq!(lines.count(), 2);

    // determinism: a second run is byte-identical
    let out2_path = dir.join("run2.csv");
    let out = run(&[
        "exp", "eps-vs-m", "--config", cfg.to_str().unwrap(), "--out", out2_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text, std::fs::read_to_string(&out2_path).unwrap());
}

#[test]
fn baseline_glasso_reports_tree() {
    let dir = tmpdir("gl");
    let path = dir.join("batch.csv");
    write_batch_csv(&path, "x,y,z", &correlated_rows(5000));
    let out = run(&["baseline", "glasso", "--input", path.to_str().unwrap(), "--lambda", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["lambda"].as_f64().unwrap(), 0.05);
    assert_eq!(v["tree"].as_array().unwrap().len(), 2);
}
