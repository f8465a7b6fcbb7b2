use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eig_closed_form_gives_pi_squared() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = plap(&[
        "eig",
        "--weight",
        "linear_r4",
        "--p",
        "2",
        "--N",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let eig = read_json(&dir.path().join("eig.json"));
    let lambda = eig["lambda1"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() / pi2 < 1e-6, "lambda1 = {lambda}");
    assert!((eig["r0"].as_f64().unwrap() - 2.0).abs() < 1e-4);
    assert_eq!(eig["schema"], 1);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("r,phi,dphi,U\n"));
}

#[test]
fn missing_or_unknown_weight_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = plap(&["eig", "--p", "2", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("weight"));
    let res = plap(&["eig", "--weight", "nonsense", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn bad_flags_and_commands_exit_two() {
    assert_eq!(plap(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        plap(&["eig", "--weight", "linear_r4", "--p", "-3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(plap(&["eig", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // The dyadic search runs out of doublings long before 1e-9.
    let res = plap(&[
        "approx-y",
        "--weight",
        "linear_r4",
        "--eps",
        "1e-9",
        "--out",
        out,
    ]);
    assert_eq!(
        res.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "poincare",
        "--weight",
        "linear_r4",
        "--m",
        "512",
        "--out",
        out,
    ];
    let mut texts = Vec::new();
    for _ in 0..2 {
        assert_eq!(plap(&args).status.code(), Some(0));
        texts.push(std::fs::read(dir.path().join("poincare.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn manifest_references_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = plap(&[
        "spectrum",
        "--weight",
        "linear_r4",
        "--k",
        "3",
        "--m",
        "256",
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(0));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["schema"], 1);
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["status"], "ok");
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["config"].as_str().unwrap().contains("k = 3\n"));
    let files: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["spectrum.csv"]);
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let res = plap(&[
        "eig",
        "--weight",
        "linear_r4",
        "--samples",
        "100",
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(0));
    let manifest = read_json(&dir.path().join("manifest.json"));
    let eig = read_json(&dir.path().join("eig.json"));
    assert_eq!(eig["manifest"], manifest["hash"]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# closed form\nweight = linear_r4\np = 1.5\nm = 100\n",
    )
    .unwrap();
    let res = plap(&[
        "eig",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "2",
        "--echo-config",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let echo = String::from_utf8(res.stdout).unwrap();
    assert!(
        echo.starts_with("weight = linear_r4\np = 2\nN = 3\n"),
        "{echo}"
    );
    assert!(echo.contains("m = 100\n"));
    // The echo is itself a valid config producing the same echo.
    let canon = dir.path().join("canon.cfg");
    std::fs::write(&canon, &echo).unwrap();
    let res = plap(&["eig", "--config", canon.to_str().unwrap(), "--echo-config"]);
    assert_eq!(String::from_utf8(res.stdout).unwrap(), echo);

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let res = plap(&["eig", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solve_reports_two_solutions_for_p_below_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = plap(&[
        "solve",
        "--weight",
        "linear_r4",
        "--p",
        "1.5",
        "--h",
        "kphi?xi=0.01",
        "--out",
        out,
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report = read_json(&dir.path().join("solve.json"));
    assert_eq!(report["verdict"], "solved");
    let sols = report["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    for (i, s) in sols.iter().enumerate() {
        assert!(s["residual"].as_f64().unwrap() < 1e-6);
        assert!(dir.path().join(format!("solution_{i}.csv")).exists());
    }
}

#[test]
fn approx_y_meets_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = plap(&[
        "approx-y",
        "--weight",
        "linear_r4",
        "--eps",
        "0.3",
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(0));
    let rep = read_json(&dir.path().join("approx_y.json"));
    assert!(rep["achieved"].as_f64().unwrap() < 0.3);
    let incs = rep["step_increments"].as_array().unwrap();
    assert_eq!(incs.len(), 3);
    assert!(incs.iter().all(|v| v.as_f64().unwrap() < 0.1));
    let csv = std::fs::read_to_string(dir.path().join("approx_y.csv")).unwrap();
    assert!(csv.starts_with("r,w,dw\n"));
}

#[test]
fn accept_passes_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let res = plap(&["accept", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12);
    let report = read_json(&dir.path().join("accept.json"));
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 12);
}
