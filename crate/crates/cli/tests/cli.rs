use std::path::Path;
use std::process::{Command, Output};

use vcir::kernels::KernelSpec;
use vcir::volterra::{mean_variance_at, resolvent_second_kind, ModelParams};

fn vcir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcir"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn riccati_matches_cir_laplace() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcir(
        dir.path(),
        &[
            "riccati", "--alpha", "1", "--beta", "-1", "--sigma", "0.3", "--u", "1", "--t", "1",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("laplace.csv"));
    let value: f64 = rows[0][1].parse().unwrap();
    // x0 = 1, b = 1.2, κ = 1, σ = 0.3
    let e = (-1.0f64).exp();
    let c = 0.09 * (1.0 - e) / 4.0;
    let exact = (1.0 + 2.0 * c).powf(-2.0 * 1.2 / 0.09) * (-e / (1.0 + 2.0 * c)).exp();
    assert!((value - exact).abs() < 1e-3, "{value} vs {exact}");
    let v = read_csv(&dir.path().join("riccati.csv"));
    assert_eq!(v.len(), 100);
}

#[test]
fn deterministic_path_matches_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcir(
        dir.path(),
        &[
            "simulate",
            "--alpha",
            "0.95",
            "--sigma",
            "0",
            "--horizon",
            "2",
            "--dt",
            "0.01",
        ],
    );
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("path.csv"));
    assert_eq!(rows.len(), 201);
    let k = KernelSpec::fractional(0.95).unwrap();
    let p = ModelParams::new(1.0, 1.2, -1.0, 0.0).unwrap();
    let table = resolvent_second_kind(&k, -1.0, 1e-3, 2000).unwrap();
    for row in rows.iter().step_by(50).skip(1) {
        let t: f64 = row[0].parse().unwrap();
        let x: f64 = row[1].parse().unwrap();
        let (m, _) = mean_variance_at(&p, &table, t).unwrap();
        assert!((x - m).abs() < 0.02, "t = {t}: {x} vs {m}");
    }
}

#[test]
fn config_file_is_strict_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "kernel = { type = \"fractional\", alpha = 0.8 }\n[model]\nsigma = 0.5\n[grid]\nhorizon = 10.0\ndt_obs = 0.05\n[monte_carlo]\npaths = 8\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let out = vcir(dir.path(), &["mc-table", "--config", c, "--paths", "6", "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("table.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[4] == "6"));

    std::fs::write(&cfg, "[model]\nsigma = 0.5\nvolatility = 1\n").unwrap();
    let out = vcir(dir.path(), &["mc-table", "--config", c]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("volatility"));
}

#[test]
fn invalid_parameter_names_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcir(dir.path(), &["simulate", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn all_degenerate_estimates_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zero.csv");
    let body: String = (0..=10).map(|i| format!("{},0\n", i as f64 * 0.1)).collect();
    std::fs::write(&input, format!("t,X\n{body}")).unwrap();
    let out = vcir(dir.path(), &["estimate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("estimate.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| !r[3].is_empty()));
}

#[test]
fn simulate_then_estimate_recovers_deterministic_drift() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--alpha", "0.8", "--sigma", "0", "--horizon", "15", "--dt", "0.005"];
    assert!(vcir(dir.path(), &[&["simulate"][..], &args].concat()).status.success());
    let input = dir.path().join("path.csv");
    let out = vcir(
        dir.path(),
        &[&["estimate", "--input", input.to_str().unwrap()][..], &args].concat(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("estimate.csv"));
    assert_eq!(rows[0][0], "mle");
    let beta: f64 = rows[0][2].parse().unwrap();
    assert!((beta + 1.0).abs() < 0.02, "{beta}");
}
