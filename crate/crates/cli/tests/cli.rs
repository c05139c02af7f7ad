use std::path::Path;
use std::process::{Command, Output};

fn tripod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tripod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_passes_for_the_default_configuration() {
    let out = tripod(&["check"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS")).count(),
        7,
        "{text}"
    );
}

#[test]
fn check_flags_a_short_loop_with_status_3() {
    let out = tripod(&["check", "--coupling.period", "20"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out)
        .lines()
        .any(|l| l.starts_with("FAIL") && l.contains("50τ < T")));
}

#[test]
fn fractional_period_fails_the_check() {
    let out = tripod(&["check", "--coupling.period", "75.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out)
        .lines()
        .any(|l| l.starts_with("FAIL") && l.contains("T/τ integral")));
}

#[test]
fn strong_coupling_only_warns() {
    let out = tripod(&["check", "--set", "coupling.chi=0.05"]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(
        text.lines()
            .any(|l| l.starts_with("WARN") && l.contains("χT")),
        "{text}"
    );
}

#[test]
fn invalid_configurations_exit_with_status_2() {
    for args in [
        &["fig3", "--noise.sigma", "-1"][..],
        &["fig3", "--set", "nope=1"],
        &["fig3", "--set", "noise.sigma"],
        &["fig3", "--sweep.values", "[75.5]"],
        &["fig3", "--mode", "exact"],
        &["fig1", "--omega1", "1.5"],
    ] {
        assert_eq!(tripod(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_files_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"noise": {"sigma": 0.05}, "sweep": {"axis": "T_over_tau", "values": [60, 40]}}"#,
    )
    .unwrap();
    let out = tripod(&["fig3", "--config", path_arg(&cfg), "--coupling.chi", "5e-4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 40.0);
    assert_eq!(rows[1][0].parse::<f64>().unwrap(), 60.0);
    assert!(rows
        .iter()
        .all(|r| r[1].parse::<f64>().unwrap() == 0.05 && r[2].parse::<f64>().unwrap() == 5e-4));
    assert!(rows.iter().all(|r| r[7] == "formula"));
}

#[test]
fn fig3_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = tripod(&[
            "fig3",
            "--mode",
            "montecarlo",
            "--trials",
            "100",
            "--seed",
            "5",
            "--sweep.values",
            "[50, 75]",
            "--out",
            path_arg(&path),
        ]);
        assert_eq!(out.status.code(), Some(0));
        path
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["config"]["mode"], "montecarlo");
    assert!(meta["loop_spec"]["theta_max"].is_number());
}

#[test]
fn all_curves_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = tripod(&[
        "fig3",
        "--all-curves",
        "--out",
        path_arg(&dir.path().join("fig3.csv")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for name in [
        "fig3_sigma0_chitau0.001.csv",
        "fig3_sigma0_chitau0.0005.csv",
        "fig3_sigma0.1_chitau0.001.csv",
        "fig3_sigma0.1_chitau0.0005.csv",
    ] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 97, "{name}");
    }
}

#[test]
fn fig1_peaks_at_equal_leakage() {
    let out = tripod(&["fig1", "--omega1", "0.4", "--points", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega1,omega0,alpha,e_r"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1], f[3])
        })
        .collect();
    let peak = rows
        .iter()
        .cloned()
        .fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    assert!(
        (peak.0 - 0.4).abs() < 1e-12 && (peak.1 - 1.0).abs() < 1e-12,
        "{peak:?}"
    );
}

#[test]
fn noise_stats_on_the_equator_loop_vanish() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("s.csv");
    let out = tripod(&[
        "noise-stats",
        "--loop",
        r#"{"theta_min": 1e-9, "theta_max": 1.5707963267948966, "phi_max": 1.5707963267948966, "period": 75, "omega": 1000, "timing": [0.3333333333333333, 0.3333333333333333, 0.3333333333333333, 0], "direction": "decreasing"}"#,
        "--trials",
        "200",
        "--samples",
        path_arg(&samples),
    ]);
    let text = stdout(&out);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let var_line = text.lines().find(|l| l.starts_with("Var δη")).unwrap();
    let var: f64 = var_line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(var < 1e-24, "{var_line}");
    assert_eq!(
        std::fs::read_to_string(&samples).unwrap().lines().count(),
        201
    );
}

#[test]
fn gate_prints_the_operators() {
    let out = tripod(&["gate", "--delta-eta", "0.02"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for needle in [
        "ideal holonomy",
        "perturbed",
        "coupled block",
        "composite",
        "E^r = ",
        "𝓕 = ",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    assert!(text.contains("γ = 0.750000000000"));
}

#[test]
fn oracle_suite_passes() {
    let out = tripod(&["oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(
        stdout(&out)
            .lines()
            .filter(|l| l.starts_with("PASS"))
            .count(),
        4
    );
}
