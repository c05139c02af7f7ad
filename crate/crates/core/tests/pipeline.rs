use std::f64::consts::FRAC_PI_2;

use tripod_holonomy::coupling::{gamma_factor, solve_gamma_loop};
use tripod_holonomy::experiment::{
    meta_path, montecarlo_point, oracle_point, run_fig3, sweep_csv, write_sweep, ExperimentConfig,
    RunMetadata, Sweep, SweepAxis, CSV_HEADER,
};
use tripod_holonomy::metrics::{approx_pair_not_gate, approx_pair_not_gate_log2, Mode};
use tripod_holonomy::noise::{delta_eta_rms, DeltaEtaKernel, NoiseSpec};

fn config(mode: Mode, values: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.mode = mode;
    cfg.trials = 300;
    cfg.sweep = Sweep {
        axis: SweepAxis::TOverTau,
        values,
    };
    cfg
}

#[test]
fn montecarlo_agrees_with_the_expansion_at_the_loop_variance() {
    let period = 75.0;
    let chi = 1e-3;
    let noise = NoiseSpec {
        sigma: 0.1,
        tau: 1.0,
        seed: 11,
    };
    let spec = solve_gamma_loop(0.75, period, 1e3).unwrap();
    let gamma = gamma_factor(spec.theta_max, spec.phi_max);
    let mc = montecarlo_point(&spec, &noise, chi, gamma, 4000).unwrap();

    // ⟨g(δη)⟩ = (g(r) + g(−r))/2 + O(r⁴) at r² = ⟨δη²⟩; the odd terms average out
    let c = DeltaEtaKernel::new(&spec, noise.tau)
        .unwrap()
        .cancellation_prefactor();
    let rms = (c * noise.sigma.powi(2) * noise.tau / period).sqrt();
    assert!(
        (mc.delta_eta_rms / rms - 1.0).abs() < 0.05,
        "{} vs {rms} (C = {c})",
        mc.delta_eta_rms
    );

    let even = |g: &dyn Fn(f64) -> f64| (g(rms) + g(-rms)) / 2.0;
    let f = even(&|de| approx_pair_not_gate(de, chi, period, gamma).1);
    let e = even(&|de| approx_pair_not_gate_log2(de, chi, period, gamma).0);
    assert!(
        (mc.fidelity - f).abs() < 3.0 * mc.fidelity_stderr + 5e-6,
        "{} ± {} vs {f}",
        mc.fidelity,
        mc.fidelity_stderr
    );
    assert!(
        (mc.e_r - e).abs() < 3.0 * mc.e_r_stderr + 5e-6,
        "{} ± {} vs {e}",
        mc.e_r,
        mc.e_r_stderr
    );
}

#[test]
fn oracle_tracks_the_formula_within_the_documented_tolerance() {
    let base = solve_gamma_loop(0.75, 75.0, 1e3).unwrap();
    for (t, sigma, chi_tau) in [(20.0, 0.1, 1e-3), (100.0, 0.1, 1e-3), (150.0, 0.1, 5e-4)] {
        let de = delta_eta_rms(sigma, 1.0, t);
        let (fe, ff) = approx_pair_not_gate(de, chi_tau, t, 0.75);
        let (oe, of) = oracle_point(&base, de, chi_tau * t, 1000.0, 100.0).unwrap();
        let (loss_f, loss_o) = (1.0 - ff, 1.0 - of);
        assert!(
            (loss_o - loss_f).abs() <= 0.2 * loss_f + 1e-5,
            "T = {t}: 1 − 𝓕 {loss_o:e} vs {loss_f:e}"
        );
        assert!(
            1.0 - oe >= 0.0 && 1.0 - oe <= 1.0 - fe,
            "T = {t}: 1 − E^r {:e} vs {:e}",
            1.0 - oe,
            1.0 - fe
        );
    }
}

#[test]
fn every_mode_stays_in_the_unit_interval() {
    for mode in [Mode::Formula, Mode::Montecarlo] {
        let mut cfg = config(mode, vec![10.0, 50.0, 120.0, 200.0]);
        cfg.noise.sigma = 0.3;
        for row in run_fig3(&cfg).unwrap().rows {
            assert!(
                (0.0..=1.0).contains(&row.e_r) && (0.0..=1.0).contains(&row.fidelity),
                "{row:?}"
            );
            assert_eq!(row.mode, mode);
        }
    }
}

#[test]
fn oracle_mode_runs_end_to_end() {
    let mut cfg = config(Mode::Oracle, vec![60.0]);
    cfg.oracle_omega_t = 200.0;
    cfg.oracle_steps_per_omega_t = 40.0;
    let rows = run_fig3(&cfg).unwrap().rows;
    assert_eq!(rows.len(), 1);
    assert!(
        rows[0].e_r > 0.99 && rows[0].fidelity > 0.99,
        "{:?}",
        rows[0]
    );
}

#[test]
fn seeds_change_montecarlo_rows_but_not_formula_rows() {
    let mut a = config(Mode::Montecarlo, vec![50.0, 90.0]);
    let mut b = a.clone();
    b.noise.seed += 1;
    assert_ne!(run_fig3(&a).unwrap().rows, run_fig3(&b).unwrap().rows);
    a.mode = Mode::Formula;
    b.mode = Mode::Formula;
    assert_eq!(
        sweep_csv(&run_fig3(&a).unwrap().rows),
        sweep_csv(&run_fig3(&b).unwrap().rows)
    );
}

#[test]
fn extending_the_grid_keeps_existing_rows() {
    let short = run_fig3(&config(Mode::Montecarlo, vec![50.0, 90.0]))
        .unwrap()
        .rows;
    let long = run_fig3(&config(Mode::Montecarlo, vec![30.0, 50.0, 70.0, 90.0]))
        .unwrap()
        .rows;
    assert_eq!(short[0], long[1]);
    assert_eq!(short[1], long[3]);
}

#[test]
fn written_runs_carry_their_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.csv");
    let cfg = config(Mode::Montecarlo, vec![40.0, 80.0]);
    let result = run_fig3(&cfg).unwrap();
    write_sweep(&result, &path).unwrap();

    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 2);

    let meta: RunMetadata =
        serde_json::from_str(&std::fs::read_to_string(meta_path(&path)).unwrap()).unwrap();
    assert_eq!(meta.config, cfg);
    assert_eq!(meta.seed, cfg.noise.seed);
    assert!((gamma_factor(meta.loop_spec.theta_max, meta.loop_spec.phi_max) - 0.75).abs() < 1e-9);
    assert!((meta.loop_spec.solid_angle() - FRAC_PI_2).abs() < 1e-12);
}
