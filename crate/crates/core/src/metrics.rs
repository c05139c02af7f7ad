//! Reduced logical entanglement, fidelity and their low-order expansions.
//!
//! `E^r` is the entropy of the A side after projecting both qubits onto the logical space and
//! renormalizing, so it is conditional on the pair staying logical.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::{composite_operator, u_chi};
use crate::error::{invalid, Error, Result};
use crate::holonomy::{embed_logical, rotation};
use crate::qmath::{
    c, entropy_bits, partial_trace_b, tensor_product, vn_entropy, ComplexMatrix, ComplexVector,
    C64, ZERO,
};

const UNITARY_COLUMN_TOL: f64 = 1e-8;
const DEGENERATE_WEIGHT: f64 = 1e-15;
const CLAMP_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakageDecomp {
    pub omega0: f64,
    pub omega1: f64,
    /// `⟨ψ₀|ψ₁⟩`, set to 0 when either projection vanishes.
    pub alpha: C64,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Formula,
    Montecarlo,
    Oracle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Formula => "formula",
            Mode::Montecarlo => "montecarlo",
            Mode::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(Mode::Formula),
            "montecarlo" => Ok(Mode::Montecarlo),
            "oracle" => Ok(Mode::Oracle),
            other => Err(invalid!(
                "unknown mode {other:?}, expected formula, montecarlo or oracle"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "T_over_tau")]
    pub t_over_tau: f64,
    pub sigma: f64,
    pub chi_tau: f64,
    pub gamma: f64,
    pub e_r: f64,
    pub fidelity: f64,
    pub delta_eta: f64,
    pub mode: Mode,
}

impl MetricsRow {
    /// Builds a row with `e_r` and `fidelity` clamped to `[0, 1]`. Values further than 1e-10
    /// outside are rejected.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t_over_tau: f64,
        sigma: f64,
        chi_tau: f64,
        gamma: f64,
        e_r: f64,
        fidelity: f64,
        delta_eta: f64,
        mode: Mode,
    ) -> Result<Self> {
        Ok(Self {
            t_over_tau,
            sigma,
            chi_tau,
            gamma,
            e_r: clamp_unit(e_r, "E^r")?,
            fidelity: clamp_unit(fidelity, "fidelity")?,
            delta_eta,
            mode,
        })
    }
}

fn clamp_unit(x: f64, what: &str) -> Result<f64> {
    if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&x) {
        return Err(invalid!("{what} = {x} is outside [0, 1]"));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// `ω_i = ‖P u|i⟩‖²` and `α = ⟨ψ₀|ψ₁⟩` for a single-system operator, given as the full 4×4
/// matrix or as its first two columns (4×2).
pub fn leakage_decomp(u: &ComplexMatrix) -> Result<LeakageDecomp> {
    if u.rows() != 4 || !(u.cols() == 4 || u.cols() == 2) {
        return Err(invalid!(
            "expected a 4x4 or 4x2 operator, got {}x{}",
            u.rows(),
            u.cols()
        ));
    }
    let col = |j: usize| u.column(j);
    let (c0, c1) = (col(0), col(1));
    for (j, v) in [&c0, &c1].into_iter().enumerate() {
        if (v.norm() - 1.0).abs() > UNITARY_COLUMN_TOL {
            return Err(invalid!(
                "column {j} has norm {}, the operator is not unitary",
                v.norm()
            ));
        }
    }
    let p0 = ComplexVector::new(vec![c0[0], c0[1]]);
    let p1 = ComplexVector::new(vec![c1[0], c1[1]]);
    let omega0 = p0.norm_sqr();
    let omega1 = p1.norm_sqr();
    let degenerate = omega0 < DEGENERATE_WEIGHT || omega1 < DEGENERATE_WEIGHT;
    let alpha = if degenerate {
        ZERO
    } else {
        p0.inner(&p1) / (omega0 * omega1).sqrt()
    };
    Ok(LeakageDecomp {
        omega0,
        omega1,
        alpha,
        degenerate,
    })
}

/// The eigenvalues `(λ₋, λ₊)` of the projected reduced state. `λ₋` is taken from the product
/// `λ₊λ₋ = ω₀ω₁(1 − |α|²)/(ω₀ + ω₁)²` to avoid cancellation near `E^r = 0`.
pub fn logical_eigenvalues(decomp: &LeakageDecomp) -> Result<(f64, f64)> {
    let (w0, w1) = (decomp.omega0, decomp.omega1);
    let s = w0 + w1;
    if !(s > 0.0) {
        return Err(Error::UndefinedEntanglement(
            "both logical states leaked completely".into(),
        ));
    }
    let a2 = decomp.alpha.norm_sqr().min(1.0);
    let disc = (w0 * w0 + 2.0 * (2.0 * a2 - 1.0) * w0 * w1 + w1 * w1).max(0.0);
    let plus = (s + disc.sqrt()) / (2.0 * s);
    let minus = (w0 * w1 * (1.0 - a2) / (s * s) / plus).max(0.0);
    Ok((minus, plus))
}

/// `E^r = −λ₋ log₂ λ₋ − λ₊ log₂ λ₊`, with `α` entering through `|α|`.
pub fn reduced_logical_entanglement(decomp: &LeakageDecomp) -> Result<f64> {
    let (minus, plus) = logical_eigenvalues(decomp)?;
    Ok(entropy_bits(&[minus, plus]).min(1.0))
}

/// `(|00⟩ + |11⟩)/√2` on two qubits (`dim = 4`) or two tripods (`dim = 16`).
pub fn bell_state(dim: usize) -> Result<ComplexVector> {
    let d = match dim {
        4 => 2,
        16 => 4,
        _ => return Err(invalid!("no two-qubit embedding of dimension {dim}")),
    };
    let mut v = ComplexVector::zeros(dim);
    v[0] = c(FRAC_1_SQRT_2, 0.0);
    v[d + 1] = c(FRAC_1_SQRT_2, 0.0);
    Ok(v)
}

/// `P⊗P u|ψ⟩`, renormalized, as a two-qubit vector.
pub fn projected_logical_state(u: &ComplexMatrix, psi: &ComplexVector) -> Result<ComplexVector> {
    let n = u.rows();
    if !u.is_square() || psi.dim() != n {
        return Err(invalid!(
            "operator is {}x{} but the state has dimension {}",
            n,
            u.cols(),
            psi.dim()
        ));
    }
    if (psi.norm() - 1.0).abs() > UNITARY_COLUMN_TOL {
        return Err(invalid!("state has norm {}", psi.norm()));
    }
    project_evolved(&u.mul_vec(psi))
}

/// `P⊗P |out⟩`, renormalized, for a two-qubit (4) or two-tripod (16) state.
pub fn project_evolved(out: &ComplexVector) -> Result<ComplexVector> {
    let d = match out.dim() {
        4 => 2,
        16 => 4,
        n => return Err(invalid!("expected a state of dimension 4 or 16, got {n}")),
    };
    let kept = ComplexVector::new(vec![out[0], out[1], out[d], out[d + 1]]);
    let norm = kept.norm();
    if norm < DEGENERATE_WEIGHT {
        return Err(Error::UndefinedEntanglement(
            "the state left the logical space".into(),
        ));
    }
    Ok(kept.scale(c(1.0 / norm, 0.0)))
}

/// `E^r` of an evolved two-system state.
pub fn entanglement_of_state(out: &ComplexVector) -> Result<f64> {
    let v = project_evolved(out)?;
    let rho_a = partial_trace_b(&v.outer(&v), 2, 2)?;
    Ok(vn_entropy(&rho_a)?.min(1.0))
}

/// `E^r` by projecting, renormalizing, tracing out B and taking the entropy.
pub fn reduced_logical_entanglement_direct(
    u_composite: &ComplexMatrix,
    psi: &ComplexVector,
) -> Result<f64> {
    let n = u_composite.rows();
    if !(n == 4 || n == 16) {
        return Err(invalid!(
            "expected a 4x4 or 16x16 operator, got {}x{}",
            n,
            u_composite.cols()
        ));
    }
    let v = projected_logical_state(u_composite, psi)?;
    let rho_a = partial_trace_b(&v.outer(&v), 2, 2)?;
    Ok(vn_entropy(&rho_a)?.min(1.0))
}

/// `(u_ideal ⊗ I)|ψ⟩`, lifting a 2×2 gate to the tripod when `ψ` has dimension 16.
pub fn ideal_evolution(u_ideal_a: &ComplexMatrix, psi: &ComplexVector) -> Result<ComplexVector> {
    let n = psi.dim();
    let ideal_a = if n == 16 && u_ideal_a.rows() == 2 {
        embed_logical(u_ideal_a)
    } else {
        u_ideal_a.clone()
    };
    let d = ideal_a.rows();
    if !ideal_a.is_square() || d * d != n {
        return Err(invalid!(
            "a {}x{} gate on A does not act on a state of dimension {n}",
            u_ideal_a.rows(),
            u_ideal_a.cols()
        ));
    }
    Ok(tensor_product(&ideal_a, &ComplexMatrix::identity(d)).mul_vec(psi))
}

/// `|⟨u_pert ψ | (u_ideal ⊗ I) ψ⟩|`. A 2×2 ideal gate is lifted to the tripod with identity on
/// `|a⟩, |G⟩` when `u_pert` is 16×16.
pub fn fidelity(
    u_pert: &ComplexMatrix,
    u_ideal_a: &ComplexMatrix,
    psi: &ComplexVector,
) -> Result<f64> {
    if !u_pert.is_square() || u_pert.rows() != psi.dim() {
        return Err(invalid!(
            "operator is {}x{} but the state has dimension {}",
            u_pert.rows(),
            u_pert.cols(),
            psi.dim()
        ));
    }
    let ideal = ideal_evolution(u_ideal_a, psi)?;
    clamp_unit(u_pert.mul_vec(psi).inner(&ideal).norm(), "fidelity")
}

/// `E^r` and `𝓕` of a two-qubit evolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMetrics {
    pub e_r: f64,
    pub fidelity: f64,
}

/// Exact metrics for the coupled gate aimed at rotation `η` that actually rotates by
/// `η + δη`, starting from the Bell state.
pub fn exact_pair_metrics(
    eta: f64,
    delta_eta: f64,
    chi: f64,
    period: f64,
    gamma: f64,
) -> Result<PairMetrics> {
    let actual = eta + delta_eta;
    let u = composite_operator(&rotation(actual), &u_chi(actual, chi, period, gamma).u_chi)?;
    let psi = bell_state(4)?;
    Ok(PairMetrics {
        e_r: reduced_logical_entanglement_direct(&u, &psi)?,
        fidelity: fidelity(&u, &rotation(eta), &psi)?,
    })
}

/// `sin⁴η/η²`, zero at `η = 0`.
fn sin4_over_sq(eta: f64) -> f64 {
    if eta.abs() < 1e-8 {
        eta * eta
    } else {
        eta.sin().powi(4) / (eta * eta)
    }
}

/// `1 − (γχT)² sin⁴η/(8η²)`, the leading coupling correction to `E^r` as printed.
pub fn e_r_approx_chi(eta: f64, chi: f64, period: f64, gamma: f64) -> f64 {
    let cp = gamma * chi * period;
    1.0 - cp * cp * sin4_over_sq(eta) / 8.0
}

/// [`e_r_approx_chi`] with the `1/ln 2` of the base-2 entropy, which the printed form drops.
pub fn e_r_approx_chi_log2(eta: f64, chi: f64, period: f64, gamma: f64) -> f64 {
    let cp = gamma * chi * period;
    1.0 - cp * cp * sin4_over_sq(eta) / (8.0 * LN_2)
}

/// `1 − (7 + 8η² + 8η sin 2η − 8 cos 2η + cos 4η)(γχT)²/(256η²)`; tends to `1 − (γχT)²/8`
/// as `η → 0`.
pub fn f_approx_chi(eta: f64, chi: f64, period: f64, gamma: f64) -> f64 {
    let cp = gamma * chi * period;
    let ratio = if eta.abs() < 1e-2 {
        // bracket/η² = 32 − 16η²/3 − 128η⁴/45 + 48η⁶/35 + O(η⁸)
        let e2 = eta * eta;
        32.0 - e2 * (16.0 / 3.0 + e2 * (128.0 / 45.0 - e2 * 48.0 / 35.0))
    } else {
        let b = 7.0 + 8.0 * eta * eta + 8.0 * eta * (2.0 * eta).sin() - 8.0 * (2.0 * eta).cos()
            + (4.0 * eta).cos();
        b / (eta * eta)
    };
    1.0 - ratio * cp * cp / 256.0
}

/// Lowest-order `(E^r, 𝓕)` for the NOT gate with rotation error `δη` and coupling:
/// `E^r ≈ 1 − (π − 4δη)(γχT)²/(2π³)`, `𝓕 ≈ 1 − δη²/2 − (8 + π²)(γχT)²/(32π²)`.
pub fn approx_pair_not_gate(delta_eta: f64, chi: f64, period: f64, gamma: f64) -> (f64, f64) {
    let cp = gamma * chi * period;
    let e = 1.0 - (PI - 4.0 * delta_eta) * cp * cp / (2.0 * PI.powi(3));
    (e, not_gate_fidelity_approx(delta_eta, cp))
}

/// [`approx_pair_not_gate`] with the `1/ln 2` restored in `E^r`.
pub fn approx_pair_not_gate_log2(delta_eta: f64, chi: f64, period: f64, gamma: f64) -> (f64, f64) {
    let cp = gamma * chi * period;
    let e = 1.0 - (PI - 4.0 * delta_eta) * cp * cp / (2.0 * PI.powi(3) * LN_2);
    (e, not_gate_fidelity_approx(delta_eta, cp))
}

fn not_gate_fidelity_approx(delta_eta: f64, cp: f64) -> f64 {
    1.0 - delta_eta * delta_eta / 2.0 - (8.0 + PI * PI) * cp * cp / (32.0 * PI * PI)
}
