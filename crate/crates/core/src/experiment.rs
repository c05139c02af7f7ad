//! Configuration, sweeps and output for the figure reproductions and the noise statistics.
//!
//! Times are measured in units of the noise correlation time `τ` only through the config: the
//! physics takes absolute `T`, `Ω`, `χ`, `τ` and every sweep point is a `(T/τ, σ, χτ)` triple.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{gamma_factor, solve_gamma_loop, u_chi, CouplingSpec};
use crate::error::{invalid, Result};
use crate::holonomy::rotation;
use crate::looppath::{LoopSpec, SegmentTiming};
use crate::metrics::{
    approx_pair_not_gate, bell_state, entanglement_of_state, exact_pair_metrics, ideal_evolution,
    reduced_logical_entanglement, LeakageDecomp, MetricsRow, Mode,
};
use crate::noise::{
    box_count, delta_eta_rms, sample_noise_trial, trial_seed, DeltaEtaKernel, NoiseSpec,
};
use crate::propagator::{propagate, propagate_gate, Schedule};
use crate::qmath::{c, ComplexMatrix, ComplexVector};

pub const CSV_HEADER: &str = "T_over_tau,sigma,chi_tau,gamma,e_r,fidelity,delta_eta,mode";
pub const FIG1_CSV_HEADER: &str = "omega1,omega0,alpha,e_r";

/// How the gate loop is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoopChoice {
    /// The NOT loop whose coupling factor `γ` equals the target.
    GammaTarget {
        gamma_target: f64,
        #[serde(default = "not_eta")]
        eta: f64,
    },
    Explicit(LoopSpec),
}

fn not_eta() -> f64 {
    FRAC_PI_2
}

impl Default for LoopChoice {
    fn default() -> Self {
        LoopChoice::GammaTarget {
            gamma_target: 0.75,
            eta: FRAC_PI_2,
        }
    }
}

impl LoopChoice {
    /// The loop at duration `period` and Rabi magnitude `omega`.
    pub fn resolve(&self, period: f64, omega: f64) -> Result<LoopSpec> {
        match *self {
            LoopChoice::GammaTarget { gamma_target, eta } => {
                if (eta - FRAC_PI_2).abs() > 1e-12 {
                    return Err(invalid!(
                        "γ-targeted loops implement the NOT gate, η must be π/2, got {eta}"
                    ));
                }
                solve_gamma_loop(gamma_target, period, omega)
            }
            LoopChoice::Explicit(spec) => LoopSpec {
                period,
                omega,
                ..spec
            }
            .validated(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[default]
    #[serde(rename = "T_over_tau")]
    TOverTau,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "chi_tau")]
    ChiTau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            axis: SweepAxis::TOverTau,
            values: default_t_grid(),
        }
    }
}

/// `T/τ = 10, 12, …, 200`.
pub fn default_t_grid() -> Vec<f64> {
    (5..=100).map(|k| 2.0 * k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "loop")]
    pub loop_choice: LoopChoice,
    /// Rabi magnitude `Ω`.
    pub omega: f64,
    pub noise: NoiseSpec,
    /// `χ` and the gate duration used when `T` is not swept.
    pub coupling: CouplingSpec,
    pub sweep: Sweep,
    pub trials: usize,
    pub mode: Mode,
    pub output_path: Option<PathBuf>,
    /// `ΩT` of the 16-level propagation in oracle mode.
    pub oracle_omega_t: f64,
    pub oracle_steps_per_omega_t: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            loop_choice: LoopChoice::default(),
            omega: 1e3,
            noise: NoiseSpec {
                sigma: 0.1,
                tau: 1.0,
                seed: 20_240_601,
            },
            coupling: CouplingSpec {
                chi: 1e-3,
                period: 75.0,
            },
            sweep: Sweep::default(),
            trials: 2000,
            mode: Mode::Formula,
            output_path: None,
            oracle_omega_t: 1000.0,
            oracle_steps_per_omega_t: 100.0,
        }
    }
}

/// One sweep point in physical units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub t_over_tau: f64,
    pub sigma: f64,
    pub chi_tau: f64,
}

impl ExperimentConfig {
    /// Parses a possibly partial document. Nested sections merge field by field over the
    /// defaults, except `loop`, which is replaced whole.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: serde_json::Value = serde_json::from_str(text)?;
        let mut value = serde_json::to_value(Self::default())?;
        merge(&mut value, user, true);
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides on the JSON form. Keys are dotted paths such as
    /// `noise.sigma`; values are parsed as JSON and fall back to strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[(S, S)]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for (key, raw) in overrides {
            set_path(&mut value, key.as_ref(), raw.as_ref())?;
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tau(&self) -> f64 {
        self.noise.tau
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let tau = self.tau();
        let base = SweepPoint {
            t_over_tau: self.coupling.period / tau,
            sigma: self.noise.sigma,
            chi_tau: self.coupling.chi * tau,
        };
        let mut values = self.sweep.values.clone();
        values.sort_by(f64::total_cmp);
        values
            .into_iter()
            .map(|v| match self.sweep.axis {
                SweepAxis::TOverTau => SweepPoint {
                    t_over_tau: v,
                    ..base
                },
                SweepAxis::Sigma => SweepPoint { sigma: v, ..base },
                SweepAxis::ChiTau => SweepPoint { chi_tau: v, ..base },
            })
            .collect()
    }

    /// Physical checks made on load: positive scales, `Ω⁻¹ < T`, integral `T/τ`, a reachable
    /// loop. `χT > 1` only warns.
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid!("Ω must be positive, got {}", self.omega));
        }
        if self.trials == 0 {
            return Err(invalid!("trials must be at least 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(invalid!("sweep has no values"));
        }
        if !(self.oracle_omega_t > 0.0 && self.oracle_steps_per_omega_t > 0.0) {
            return Err(invalid!("oracle ΩT and step density must be positive"));
        }
        CouplingSpec::new(self.coupling.chi, self.coupling.period)?;
        let tau = self.tau();
        for p in self.points() {
            if !(p.t_over_tau.is_finite() && p.sigma.is_finite() && p.chi_tau.is_finite()) {
                return Err(invalid!("sweep value is not finite"));
            }
            let period = p.t_over_tau * tau;
            box_count(period, tau)?;
            if 1.0 / self.omega >= period {
                return Err(invalid!(
                    "need Ω⁻¹ < T, got Ω⁻¹ = {} and T = {period}",
                    1.0 / self.omega
                ));
            }
            NoiseSpec {
                sigma: p.sigma,
                ..self.noise
            }
            .validate()?;
            CouplingSpec::new(p.chi_tau / tau, period)?;
        }
        let loop_spec = self.loop_choice.resolve(self.coupling.period, self.omega)?;
        if (loop_spec.solid_angle() - FRAC_PI_2).abs() > 1e-6 {
            return Err(invalid!(
                "the loop encloses {} instead of π/2",
                loop_spec.solid_angle()
            ));
        }
        if loop_spec.timing != SegmentTiming::pole_collapsed() {
            warn!("γ is the time average of the coupling only with pole-collapsed timing");
        }
        Ok(())
    }
}

fn merge(base: &mut serde_json::Value, user: serde_json::Value, top: bool) {
    match (base, user) {
        (serde_json::Value::Object(b), serde_json::Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if !(top && k == "loop") => merge(slot, v, false),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut serde_json::Value, key: &str, raw: &str) -> Result<()> {
    let parsed =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            invalid!(
                "cannot set {key}: {} is not an object",
                parts[..i].join(".")
            )
        })?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) && !matches!(*part, "output_path") {
                return Err(invalid!("unknown config key {key}"));
            }
            obj.insert((*part).to_string(), parsed);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| invalid!("unknown config key {key}"))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub build: String,
    /// The loop at the configured duration, with its `θ_M, φ_M`.
    pub loop_spec: LoopSpec,
    pub gamma: f64,
    pub created_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<MetricsRow>,
    pub metadata: RunMetadata,
}

pub fn build_id() -> String {
    option_env!("TRIPOD_BUILD_ID")
        .map(str::to_string)
        .unwrap_or_else(|| format!("tripod-holonomy-{}", env!("CARGO_PKG_VERSION")))
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn metadata(config: &ExperimentConfig, loop_spec: LoopSpec, gamma: f64) -> RunMetadata {
    RunMetadata {
        config: config.clone(),
        seed: config.noise.seed,
        build: build_id(),
        loop_spec,
        gamma,
        created_unix: now_unix(),
    }
}

/// Monte-Carlo averages at one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloPoint {
    pub e_r: f64,
    pub e_r_stderr: f64,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub delta_eta_rms: f64,
    pub trials: usize,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Samples `δη` on the loop and averages the exact `E^r` and `𝓕` of the coupled NOT gate.
pub fn montecarlo_point(
    loop_spec: &LoopSpec,
    noise: &NoiseSpec,
    chi: f64,
    gamma: f64,
    trials: usize,
) -> Result<MonteCarloPoint> {
    if trials == 0 {
        return Err(invalid!("trials must be at least 1"));
    }
    let kernel = DeltaEtaKernel::new(loop_spec, noise.tau)?;
    let period = loop_spec.period;
    let per_trial: Vec<(f64, f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let de = kernel.apply(&sample_noise_trial(noise, period, i)?)?;
            let m = exact_pair_metrics(FRAC_PI_2, de, chi, period, gamma)?;
            Ok((de, m.e_r, m.fidelity))
        })
        .collect::<Result<_>>()?;
    let es: Vec<f64> = per_trial.iter().map(|t| t.1).collect();
    let fs: Vec<f64> = per_trial.iter().map(|t| t.2).collect();
    let (e_r, e_r_stderr) = mean_and_stderr(&es);
    let (fidelity, fidelity_stderr) = mean_and_stderr(&fs);
    let ms = per_trial.iter().map(|t| t.0 * t.0).sum::<f64>() / trials as f64;
    Ok(MonteCarloPoint {
        e_r,
        e_r_stderr,
        fidelity,
        fidelity_stderr,
        delta_eta_rms: ms.sqrt(),
        trials,
    })
}

/// `E^r` and `𝓕` from the 16-level propagation of the Bell state. Only `χT` and the enclosed
/// angle carry over from the physical point: the propagation runs at `ΩT = omega_t` and the
/// parametric error enters as a loop enclosing `π/2 + δη`.
pub fn oracle_point(
    base: &LoopSpec,
    delta_eta: f64,
    chi_t: f64,
    omega_t: f64,
    steps_per_omega_t: f64,
) -> Result<(f64, f64)> {
    let area = base.theta_min.cos() - base.theta_max.cos();
    let stretched = LoopSpec {
        phi_max: (FRAC_PI_2 + delta_eta) / area,
        period: omega_t,
        omega: 1.0,
        ..*base
    }
    .validated()?;
    let steps = (steps_per_omega_t * omega_t).ceil() as usize;
    let sched = Schedule::coupled_loop(&stretched, chi_t / omega_t, steps)?;
    let psi = bell_state(16)?;
    let out = propagate(&sched, &psi)?;
    let e = entanglement_of_state(&out)?;
    let f = out
        .inner(&ideal_evolution(&rotation(FRAC_PI_2), &psi)?)
        .norm()
        .min(1.0);
    Ok((e, f))
}

/// Seed for the trials at one sweep point. It depends on the point's values rather than its
/// position, so extending the grid leaves existing rows unchanged.
pub fn point_seed(base: u64, p: &SweepPoint) -> u64 {
    let key = p.t_over_tau.to_bits()
        ^ p.sigma.to_bits().rotate_left(21)
        ^ p.chi_tau.to_bits().rotate_left(42);
    trial_seed(base, key)
}

/// `E^r` and `𝓕` of the coupled NOT gate along the sweep.
pub fn run_fig3(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let tau = config.tau();
    let base = config
        .loop_choice
        .resolve(config.coupling.period, config.omega)?;
    let gamma = gamma_factor(base.theta_max, base.phi_max);
    info!(
        "loop θ_M = {}, φ_M = {}, γ = {gamma}",
        base.theta_max, base.phi_max
    );
    let points = config.points();
    let rows = points
        .par_iter()
        .map(|p| -> Result<MetricsRow> {
            let period = p.t_over_tau * tau;
            let chi = p.chi_tau / tau;
            let de = delta_eta_rms(p.sigma, tau, period);
            let (e, f, de) = match config.mode {
                Mode::Formula => {
                    let (e, f) = approx_pair_not_gate(de, chi, period, gamma);
                    (e, f, de)
                }
                Mode::Montecarlo => {
                    let loop_spec = base.with_period(period)?;
                    let noise = NoiseSpec {
                        sigma: p.sigma,
                        tau,
                        seed: point_seed(config.noise.seed, p),
                    };
                    let m = montecarlo_point(&loop_spec, &noise, chi, gamma, config.trials)?;
                    (m.e_r, m.fidelity, m.delta_eta_rms)
                }
                Mode::Oracle => {
                    let (e, f) = oracle_point(
                        &base,
                        de,
                        chi * period,
                        config.oracle_omega_t,
                        config.oracle_steps_per_omega_t,
                    )?;
                    (e, f, de)
                }
            };
            MetricsRow::new(
                p.t_over_tau,
                p.sigma,
                p.chi_tau,
                gamma,
                e,
                f,
                de,
                config.mode,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        rows,
        metadata: metadata(config, base, gamma),
    })
}

/// The four reference curves `σ ∈ {0, 0.1}` and `χτ ∈ {10⁻³, 5·10⁻⁴}` over the `T/τ` grid.
pub fn fig3_reference_configs(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for sigma in [0.0, 0.1] {
        for chi_tau in [1e-3, 5e-4] {
            let mut cfg = base.clone();
            cfg.noise.sigma = sigma;
            cfg.coupling.chi = chi_tau / cfg.noise.tau;
            cfg.sweep.axis = SweepAxis::TOverTau;
            out.push(cfg);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub omega1: f64,
    pub omega0: f64,
    pub alpha: f64,
    pub e_r: f64,
}

/// `E^r(ω₀)` at `α = 0` for each `ω₁`.
pub fn run_fig1_right(omega1_values: &[f64], omega0_grid: &[f64]) -> Result<Vec<Fig1Row>> {
    let in_range = |w: &f64| *w > 0.0 && *w <= 1.0;
    if !omega1_values.iter().chain(omega0_grid).all(in_range) {
        return Err(invalid!("leakage weights must lie in (0, 1]"));
    }
    let mut rows = Vec::with_capacity(omega1_values.len() * omega0_grid.len());
    for &omega1 in omega1_values {
        for &omega0 in omega0_grid {
            let d = LeakageDecomp {
                omega0,
                omega1,
                alpha: c(0.0, 0.0),
                degenerate: false,
            };
            rows.push(Fig1Row {
                omega1,
                omega0,
                alpha: 0.0,
                e_r: reduced_logical_entanglement(&d)?,
            });
        }
    }
    Ok(rows)
}

/// Evenly spaced grid on `(0, 1]` with `n` points ending at 1.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
    /// Soft checks only warn.
    pub hard: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// 0 when every hard check passes, 3 otherwise.
    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            0
        } else {
            3
        }
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.passed, c.hard) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            };
            writeln!(f, "{tag}  {:<22} {:.4e} vs {:.4e}", c.name, c.lhs, c.rhs)?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "all hard constraints hold"
            } else {
                "hard constraint violated"
            }
        )
    }
}

/// `Ω⁻¹ < 50τ < T < 100τ < χ⁻¹` at the configured `T`, plus `σ ≪ √50·π/2` (read as a tenth
/// of it) and `χT ≤ 1` as warnings.
pub fn constraint_report(config: &ExperimentConfig) -> ConstraintReport {
    let tau = config.noise.tau;
    let t = config.coupling.period;
    let chi = config.coupling.chi;
    let inv_chi = if chi > 0.0 { 1.0 / chi } else { f64::INFINITY };
    let sigma_cap = 0.1 * 50f64.sqrt() * FRAC_PI_2;
    let check = |name: &str, lhs: f64, rhs: f64, passed: bool, hard: bool| ConstraintCheck {
        name: name.to_string(),
        lhs,
        rhs,
        passed,
        hard,
    };
    let n = t / tau;
    ConstraintReport {
        checks: vec![
            check(
                "Ω⁻¹ < 50τ",
                1.0 / config.omega,
                50.0 * tau,
                1.0 / config.omega < 50.0 * tau,
                true,
            ),
            check("50τ < T", 50.0 * tau, t, 50.0 * tau < t, true),
            check("T < 100τ", t, 100.0 * tau, t < 100.0 * tau, true),
            check(
                "100τ < χ⁻¹",
                100.0 * tau,
                inv_chi,
                100.0 * tau < inv_chi,
                true,
            ),
            check(
                "T/τ integral",
                n,
                n.round(),
                box_count(t, tau).is_ok(),
                true,
            ),
            check(
                "σ ≪ √50·π/2",
                config.noise.sigma,
                sigma_cap,
                config.noise.sigma <= sigma_cap,
                false,
            ),
            check("χT ≤ 1", chi * t, 1.0, chi * t <= 1.0, false),
        ],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaEtaStats {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub samples: Vec<f64>,
}

/// `δη` for `trials` noise realizations, trial `i` seeded by `trial_seed(noise.seed, i)`.
pub fn run_montecarlo_delta_eta(
    loop_spec: &LoopSpec,
    noise: &NoiseSpec,
    trials: usize,
) -> Result<DeltaEtaStats> {
    if trials == 0 {
        return Err(invalid!("trials must be at least 1"));
    }
    let kernel = DeltaEtaKernel::new(loop_spec, noise.tau)?;
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| kernel.apply(&sample_noise_trial(noise, loop_spec.period, i)?))
        .collect::<Result<_>>()?;
    let n = trials as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = if trials > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(DeltaEtaStats {
        mean,
        variance,
        samples,
    })
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// The CSV payload, floats with 17 significant digits.
pub fn sweep_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let fields = [
            r.t_over_tau,
            r.sigma,
            r.chi_tau,
            r.gamma,
            r.e_r,
            r.fidelity,
            r.delta_eta,
        ]
        .map(fmt_f);
        s.push_str(&fields.join(","));
        s.push(',');
        s.push_str(r.mode.as_str());
        s.push('\n');
    }
    s
}

pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut s = String::from(FIG1_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&[r.omega1, r.omega0, r.alpha, r.e_r].map(fmt_f).join(","));
        s.push('\n');
    }
    s
}

pub fn delta_eta_csv(samples: &[f64]) -> String {
    let mut s = String::from("trial,delta_eta\n");
    for (i, x) in samples.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", fmt_f(*x)));
    }
    s
}

/// `out.csv` → `out.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Writes the CSV and its sibling `.meta.json`.
pub fn write_sweep(result: &SweepResult, path: &Path) -> Result<()> {
    write_file(path, &sweep_csv(&result.rows))?;
    write_file(
        &meta_path(path),
        &serde_json::to_string_pretty(&result.metadata)?,
    )
}

pub fn write_fig1(rows: &[Fig1Row], path: &Path) -> Result<()> {
    write_file(path, &fig1_csv(rows))
}

pub fn write_delta_eta_samples(samples: &[f64], path: &Path) -> Result<()> {
    write_file(path, &delta_eta_csv(samples))
}

/// One line of the propagator cross-validation suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag}  {:<44} error {:.3e} (tolerance {:.1e})",
            self.name, self.error, self.tolerance
        )
    }
}

/// Error of the propagated NOT loop at `θ_M` against `[[0, 1], [−1, 0]]` and its worst column
/// leakage. The equator loop `θ_M = π/2` has four legs of `ΩT/4`; its corner kicks cancel when
/// `ΩT/4` is near a multiple of `2π`, so use a generic `θ_M` to see adiabatic convergence.
pub fn not_loop_oracle(theta_max: f64, omega_t: f64, steps_per_omega_t: f64) -> Result<(f64, f64)> {
    let spec = LoopSpec::not_gate(theta_max, omega_t, 1.0)?;
    let sched = Schedule::single_loop(&spec, (steps_per_omega_t * omega_t).ceil() as usize)?;
    let gate = propagate_gate(
        &sched,
        &[ComplexVector::basis(4, 0), ComplexVector::basis(4, 1)],
    )?;
    let target = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    Ok((gate.matrix.max_abs_diff(&target), gate.max_leakage()))
}

/// Error of the closed-form coupled gate against the 16-level propagation on `{|01⟩, |11⟩}`
/// for the `γ = 0.75` loop with `χTγ = chi_t_gamma`.
pub fn coupled_oracle(omega_t: f64, chi_t_gamma: f64, steps_per_omega_t: f64) -> Result<f64> {
    let spec = solve_gamma_loop(0.75, omega_t, 1.0)?;
    let gamma = gamma_factor(spec.theta_max, spec.phi_max);
    let chi = chi_t_gamma / (omega_t * gamma);
    let sched = Schedule::coupled_loop(&spec, chi, (steps_per_omega_t * omega_t).ceil() as usize)?;
    let gate = propagate_gate(
        &sched,
        &[ComplexVector::basis(16, 1), ComplexVector::basis(16, 5)],
    )?;
    Ok(gate
        .matrix
        .max_abs_diff(&u_chi(spec.solid_angle_regularized(), chi, omega_t, gamma).u_chi))
}

/// The `(π/3, π)` NOT loop at `ΩT ∈ {50, 200, 500}` and the coupled gate at `ΩT = 500, χTγ = 0.1`.
pub fn run_oracle_suite() -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for omega_t in [50.0, 200.0, 500.0] {
        let (err, leak) = not_loop_oracle(FRAC_PI_3, omega_t, 100.0)?;
        errors.push(err);
        if omega_t == 500.0 {
            out.push(OracleCheck {
                name: "NOT loop, ΩT = 500, entries".into(),
                error: err,
                tolerance: 2e-2,
                passed: err <= 2e-2,
            });
            out.push(OracleCheck {
                name: "NOT loop, ΩT = 500, leakage".into(),
                error: leak,
                tolerance: 2e-2,
                passed: leak <= 2e-2,
            });
        }
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    out.push(OracleCheck {
        name: "NOT loop error decreasing over ΩT = 50, 200, 500".into(),
        error: errors[2],
        tolerance: errors[0],
        passed: monotone,
    });
    let err = coupled_oracle(500.0, 0.1, 100.0)?;
    out.push(OracleCheck {
        name: "coupled gate, ΩT = 500, χTγ = 0.1".into(),
        error: err,
        tolerance: 5e-2,
        passed: err <= 5e-2,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mode: Mode, values: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            trials: 200,
            sweep: Sweep {
                axis: SweepAxis::TOverTau,
                values,
            },
            ..Default::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(text.contains("\"loop\":{\"gamma_target\":0.75"));
    }

    #[test]
    fn partial_configs_take_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"trials": 7, "noise": {"sigma": 0.2}, "sweep": {"values": [40, 60]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.noise.sigma, 0.2);
        assert_eq!(cfg.noise.seed, ExperimentConfig::default().noise.seed);
        assert_eq!(cfg.sweep.axis, SweepAxis::TOverTau);
        assert_eq!(cfg.omega, 1e3);
        assert!(ExperimentConfig::from_json(r#"{"noise": {"sigma": 0.2, "tua": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"trails": 7}"#).is_err());
    }

    #[test]
    fn explicit_loops_are_accepted() {
        let spec = LoopSpec::not_gate(1.0, 10.0, 1.0).unwrap();
        let text = format!(r#"{{"loop": {}}}"#, serde_json::to_string(&spec).unwrap());
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.loop_choice, LoopChoice::Explicit(_)));
        let resolved = cfg.loop_choice.resolve(75.0, 1e3).unwrap();
        assert_eq!((resolved.period, resolved.omega), (75.0, 1e3));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut cfg = ExperimentConfig::default();
            f(&mut cfg);
            cfg.validate().is_err()
        };
        assert!(bad(&|c| c.sweep.values = vec![10.5]));
        assert!(bad(&|c| c.sweep.values.clear()));
        assert!(bad(&|c| c.trials = 0));
        assert!(bad(&|c| c.omega = 0.01));
        assert!(bad(&|c| c.noise.sigma = -0.1));
        assert!(bad(&|c| c.loop_choice = LoopChoice::GammaTarget {
            gamma_target: 0.5,
            eta: FRAC_PI_2
        }));
        assert!(bad(&|c| c.loop_choice = LoopChoice::GammaTarget {
            gamma_target: 0.75,
            eta: 1.0
        }));
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                ("noise.sigma", "0.05"),
                ("mode", "montecarlo"),
                ("output_path", "out/x.csv"),
            ])
            .unwrap();
        assert_eq!(cfg.noise.sigma, 0.05);
        assert_eq!(cfg.mode, Mode::Montecarlo);
        assert_eq!(cfg.output_path.as_deref(), Some(Path::new("out/x.csv")));
        assert!(ExperimentConfig::default()
            .with_overrides(&[("noise.sigmaa", "1")])
            .is_err());
        assert!(ExperimentConfig::default()
            .with_overrides(&[("mode", "exact")])
            .is_err());
    }

    #[test]
    fn sweep_points_follow_the_axis() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep = Sweep {
            axis: SweepAxis::Sigma,
            values: vec![0.2, 0.0, 0.1],
        };
        let pts = cfg.points();
        assert_eq!(
            pts.iter().map(|p| p.sigma).collect::<Vec<_>>(),
            vec![0.0, 0.1, 0.2]
        );
        assert!(pts
            .iter()
            .all(|p| p.t_over_tau == 75.0 && (p.chi_tau - 1e-3).abs() < 1e-18));
    }

    #[test]
    fn formula_rows_match_the_expansion() {
        let res = run_fig3(&quick(Mode::Formula, vec![100.0, 50.0])).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows[0].t_over_tau, 50.0);
        let r = &res.rows[1];
        let (e, f) = approx_pair_not_gate(0.01, 1e-3, 100.0, res.metadata.gamma);
        assert!((r.e_r - e).abs() < 1e-15 && (r.fidelity - f).abs() < 1e-15);
        assert!((r.delta_eta - 0.01).abs() < 1e-15);
        assert!((res.metadata.gamma - 0.75).abs() < 1e-12);
    }

    #[test]
    fn montecarlo_is_deterministic() {
        let cfg = quick(Mode::Montecarlo, vec![60.0, 90.0]);
        let a = sweep_csv(&run_fig3(&cfg).unwrap().rows);
        let b = sweep_csv(&run_fig3(&cfg).unwrap().rows);
        assert_eq!(a, b);
        assert!(a
            .lines()
            .all(|l| l.ends_with("montecarlo") || l == CSV_HEADER));
    }

    #[test]
    fn fig1_examples() {
        let rows = run_fig1_right(&[1.0, 0.4], &[0.4, 1.0]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[1].e_r - 1.0).abs() < 1e-15);
        assert!((rows[2].e_r - 1.0).abs() < 1e-15);
        assert!((rows[3].e_r - 0.863_120_568_566_631).abs() < 1e-12);
        assert!(run_fig1_right(&[0.0], &[1.0]).is_err());
        assert_eq!(fig1_csv(&rows).lines().next(), Some(FIG1_CSV_HEADER));
    }

    #[test]
    fn constraint_examples() {
        let mut cfg = ExperimentConfig::default();
        let r = constraint_report(&cfg);
        assert!(r.passed() && r.failures().count() == 0, "{r}");
        cfg.coupling.period = 20.0;
        let r = constraint_report(&cfg);
        assert_eq!(r.exit_status(), 3);
        assert_eq!(
            r.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["50τ < T"]
        );
        cfg.coupling.period = 75.0;
        cfg.coupling.chi = 0.05;
        let r = constraint_report(&cfg);
        let failed: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"χT ≤ 1") && failed.contains(&"100τ < χ⁻¹"));
        cfg.coupling.chi = 1e-3;
        cfg.noise.sigma = 5.0;
        let r = constraint_report(&cfg);
        assert!(r.passed() && r.failures().count() == 1);
    }

    #[test]
    fn delta_eta_statistics() {
        let spec = LoopSpec::not_gate(1.2, 100.0, 1e3).unwrap();
        let zero = run_montecarlo_delta_eta(
            &spec,
            &NoiseSpec {
                sigma: 0.0,
                tau: 1.0,
                seed: 1,
            },
            50,
        )
        .unwrap();
        assert!(zero.samples.iter().all(|&x| x == 0.0));
        let eq = LoopSpec::equator(100.0, 1e3)
            .unwrap()
            .with_timing(SegmentTiming::pole_collapsed());
        let s = run_montecarlo_delta_eta(
            &eq,
            &NoiseSpec {
                sigma: 0.1,
                tau: 1.0,
                seed: 1,
            },
            200,
        )
        .unwrap();
        assert!(s.variance <= 1e-24);
        let noise = NoiseSpec {
            sigma: 0.1,
            tau: 1.0,
            seed: 9,
        };
        let a = run_montecarlo_delta_eta(&spec, &noise, 300).unwrap();
        let b = run_montecarlo_delta_eta(&spec, &noise, 100).unwrap();
        assert_eq!(&a.samples[..100], &b.samples[..]);
        assert!(run_montecarlo_delta_eta(&spec, &noise, 0).is_err());
    }

    #[test]
    fn csv_and_meta_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/fig3.csv");
        let res = run_fig3(&quick(Mode::Formula, vec![50.0])).unwrap();
        write_sweep(&res, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, sweep_csv(&res.rows));
        let line = text.lines().nth(1).unwrap();
        assert!(line.starts_with("5.0000000000000000e1,1.0000000000000001e-1,"));
        let meta: RunMetadata =
            serde_json::from_str(&fs::read_to_string(meta_path(&path)).unwrap()).unwrap();
        assert_eq!(meta.config, res.metadata.config);
        assert!((meta.loop_spec.theta_max - 1.2439529657605537).abs() < 1e-9);
    }
}
