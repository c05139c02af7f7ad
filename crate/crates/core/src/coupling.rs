//! An always-on coupling `χ|11⟩⟨11|` between the gate qubit A and a spectator B.
//!
//! When B sits in `|1⟩` the coupling splits the dark pair of A. The closed-form gate keeps only
//! the loop average of the split, `χTγ`, on top of the geometric rotation.

use std::f64::consts::FRAC_PI_2;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::holonomy::{rotation, EigenFrame, SMALL_DELTA_ETA};
use crate::looppath::{
    not_gate_phi_max, not_gate_theta_floor, AnglePoint, LoopSpec, SegmentTiming,
};
use crate::qmath::{c, tensor_product, ComplexMatrix, ComplexVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub chi: f64,
    /// Gate duration `T`.
    pub period: f64,
}

impl CouplingSpec {
    /// Warns when `χT > 1`, where the dark pair no longer stays degenerate enough for a
    /// holonomy.
    pub fn new(chi: f64, period: f64) -> Result<Self> {
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(invalid!("χ must be non-negative, got {chi}"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid!("T must be positive, got {period}"));
        }
        let spec = Self { chi, period };
        if spec.chi_t() > 1.0 {
            warn!("χT = {} exceeds 1", spec.chi_t());
        }
        Ok(spec)
    }

    pub fn chi_t(&self) -> f64 {
        self.chi * self.period
    }
}

/// `H_I` in the dark pair `{|D₁1⟩, |D₂1⟩}`:
/// `χ [[cos²θ sin²φ, cos θ cos φ sin φ], [cos θ cos φ sin φ, cos²φ]]`.
pub fn h_i_dark_basis(theta: f64, phi: f64, chi: f64) -> ComplexMatrix {
    let ct = theta.cos();
    let (sp, cp) = phi.sin_cos();
    let off = chi * ct * cp * sp;
    ComplexMatrix::from_real_rows(&[&[chi * ct * ct * sp * sp, off], &[off, chi * cp * cp]])
}

/// The non-zero eigenvalue `Ē₂ = χ(cos²φ + cos²θ sin²φ)`; the other one is `Ē₁ = 0`.
pub fn coupling_eigenvalue(theta: f64, phi: f64, chi: f64) -> f64 {
    let ct = theta.cos();
    let (sp, cp) = phi.sin_cos();
    chi * (cp * cp + ct * ct * sp * sp)
}

/// Coefficients `(ᾱ, β̄)` of the split dark pair `D̄₁ = ᾱD₁ − β̄D₂`, `D̄₂ = β̄D₁ + ᾱD₂`.
pub fn perturbed_dark_frame_chi(theta: f64, phi: f64) -> Result<(f64, f64)> {
    let x = phi.cos();
    let y = theta.cos() * phi.sin();
    let r = x.hypot(y);
    if r < 1e-12 {
        return Err(invalid!(
            "the coupling does not split the dark pair at θ = {theta}, φ = {phi}"
        ));
    }
    Ok((x / r, y / r))
}

/// `D̄₁, D̄₂` in the single-system basis.
pub fn split_dark_states(theta: f64, phi: f64) -> Result<(ComplexVector, ComplexVector)> {
    let (a, b) = perturbed_dark_frame_chi(theta, phi)?;
    let f = EigenFrame::from_angles(theta, phi, 1.0);
    let d1 = &f.d1.scale(c(a, 0.0)) - &f.d2.scale(c(b, 0.0));
    let d2 = &f.d1.scale(c(b, 0.0)) + &f.d2.scale(c(a, 0.0));
    Ok((d1, d2))
}

/// `sin(2x)/x`, equal to 2 at `x = 0`.
fn sin2_over(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        2.0 - 4.0 * x * x / 3.0
    } else {
        (2.0 * x).sin() / x
    }
}

/// Loop average of `Ē₂/χ` for the loop with corners `θ_M`, `φ_M`, legs 1 to 3 taking `T/3`
/// each:
///
/// `γ = 1/3 + [sin 2θ_M sin²φ_M + (3 + cos 2φ_M) θ_M]/(12θ_M)
///          + [sin 2φ_M sin²θ_M + (3 + cos 2θ_M) φ_M]/(12φ_M)`.
pub fn gamma_factor(theta_max: f64, phi_max: f64) -> f64 {
    let (st, sp) = (theta_max.sin(), phi_max.sin());
    1.0 / 3.0
        + (sin2_over(theta_max) * sp * sp + 3.0 + (2.0 * phi_max).cos()) / 12.0
        + (sin2_over(phi_max) * st * st + 3.0 + (2.0 * theta_max).cos()) / 12.0
}

/// `(1/T) ∫ Ē₂/χ dt` by Simpson's rule along the loop.
pub fn gamma_time_average(spec: &LoopSpec, intervals_per_leg: usize) -> f64 {
    spec.integrate(intervals_per_leg, |p| {
        coupling_eigenvalue(p.theta, p.phi, 1.0)
    }) / spec.period
}

/// Range of `γ` over NOT loops, found on a fine grid of `θ_M`.
pub fn gamma_range_on_not_loops() -> (f64, f64) {
    let lo = not_gate_theta_floor();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..=20_000 {
        let theta = lo + (FRAC_PI_2 - lo) * k as f64 / 20_000.0;
        if let Ok(phi) = not_gate_phi_max(theta) {
            let g = gamma_factor(theta, phi);
            min = min.min(g);
            max = max.max(g);
        }
    }
    (min, max)
}

/// The NOT loop with `γ(θ_M, φ_M) = target`, legs 1 to 3 of `T/3` and an instantaneous polar
/// leg. Along `φ_M = (π/2)/(1 − cos θ_M)` the factor is not monotone, so the first sign change
/// from the `φ_M = 2π` end is located on a grid and refined by bisection.
pub fn solve_gamma_loop(target: f64, period: f64, omega: f64) -> Result<LoopSpec> {
    let lo = not_gate_theta_floor() * (1.0 + 1e-12);
    let f = |theta: f64| -> f64 {
        gamma_factor(theta, not_gate_phi_max(theta).expect("θ above the floor")) - target
    };
    const GRID: usize = 4000;
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=GRID {
        let b = lo + (FRAC_PI_2 - lo) * k as f64 / GRID as f64;
        let fb = f(b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            let (mut x0, mut x1) = (a, b);
            if fa != 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    if f(mid).signum() == fa.signum() {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                    if x1 - x0 < 1e-15 {
                        break;
                    }
                }
            }
            let theta = if fa == 0.0 { a } else { 0.5 * (x0 + x1) };
            return Ok(LoopSpec::not_gate(theta, period, omega)?
                .with_timing(SegmentTiming::pole_collapsed()));
        }
        a = b;
        fa = fb;
    }
    let (min, max) = gamma_range_on_not_loops();
    Err(invalid!(
        "γ = {target} is not reachable by a NOT loop (range [{min:.6}, {max:.6}])"
    ))
}

/// `ᾱ β̄̇ − β̄ ᾱ̇ = ψ̇` with `ψ = atan2(β̄, ᾱ)`, evaluated analytically.
pub fn off_diagonal_connection(p: &AnglePoint) -> f64 {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    let x = cp;
    let y = ct * sp;
    let xd = -sp * p.phi_dot;
    let yd = -st * sp * p.theta_dot + ct * cp * p.phi_dot;
    (x * yd - y * xd) / (x * x + y * y)
}

/// `∫ (ᾱ β̄̇ − β̄ ᾱ̇) dt` around the loop. It vanishes when every leg takes positive time.
pub fn off_diagonal_connection_integral(spec: &LoopSpec, intervals_per_leg: usize) -> f64 {
    spec.integrate(intervals_per_leg, off_diagonal_connection)
}

#[derive(Clone, Debug)]
pub struct CoupledGate {
    pub u_chi: ComplexMatrix,
    pub mu: f64,
    pub gamma: f64,
    pub eta: f64,
}

/// `(μ, K₊, K₋, sin(μ/2))` for rotation `η` and phase `c = χTγ`.
fn chi_parts(eta: f64, c_phase: f64) -> (f64, C64, C64, f64) {
    let mu = (4.0 * eta * eta + c_phase * c_phase).sqrt();
    let (s, co) = (0.5 * mu).sin_cos();
    (mu, c(mu * co, c_phase * s), c(mu * co, -c_phase * s), s)
}

/// Gate on `{|D̄₁1⟩, |D̄₂1⟩}` generated by the rotation `η` and the averaged split `χTγ`:
///
/// `U_χ = e^{−iχTγ/2}/μ [[K₊, 2η sin(μ/2)], [−2η sin(μ/2), K₋]]`,
/// `K± = μ cos(μ/2) ± iχTγ sin(μ/2)`, `μ = √(4η² + (χTγ)²)`.
///
/// This is `exp(−i diag(0, χTγ) − [[0, −η], [η, 0]])`. At `η = 0` it reduces to
/// `diag(1, e^{−iχTγ})`.
pub fn u_chi(eta: f64, chi: f64, period: f64, gamma: f64) -> CoupledGate {
    let cp = chi * period * gamma;
    let (mu, kp, km, s) = chi_parts(eta, cp);
    let u = if mu == 0.0 {
        ComplexMatrix::identity(2)
    } else {
        let pre = C64::from_polar(1.0 / mu, -0.5 * cp);
        let off = c(2.0 * eta * s, 0.0);
        ComplexMatrix::from_rows(&[vec![pre * kp, pre * off], vec![-pre * off, pre * km]])
    };
    CoupledGate {
        u_chi: u,
        mu,
        gamma,
        eta,
    }
}

/// The same gate with the opposite sign convention for the phase, `e^{+iχTγ/2}/μ` with `K₋`
/// on the first diagonal entry. It is the complex conjugate of [`u_chi`] and does not solve
/// `iψ̇ = Hψ`; kept for comparison against the propagator.
pub fn u_chi_conjugate_convention(eta: f64, chi: f64, period: f64, gamma: f64) -> ComplexMatrix {
    u_chi(eta, chi, period, gamma).u_chi.conj()
}

/// [`u_chi`] at `η̃ = π/2 + δη`.
pub fn perturbed_u_chi(delta_eta: f64, chi: f64, period: f64, gamma: f64) -> CoupledGate {
    if delta_eta.abs() > SMALL_DELTA_ETA {
        warn!("δη = {delta_eta} is outside the small-error regime");
    }
    u_chi(FRAC_PI_2 + delta_eta, chi, period, gamma)
}

/// `𝒰 = U₀ ⊗ |0⟩⟨0| + U₁ ⊗ |1⟩⟨1|` on A ⊗ B (A-major).
///
/// For 2×2 blocks B is a qubit and the result is 4×4. For 4×4 blocks B has the four tripod
/// levels and A is left untouched when B is in `|a⟩` or `|G⟩`, so the result is unitary.
pub fn composite_operator(u_b0: &ComplexMatrix, u_b1: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = u_b0.rows();
    if !(n == 2 || n == 4) || !u_b0.is_square() || u_b1.rows() != n || u_b1.cols() != n {
        return Err(invalid!(
            "blocks must both be 2x2 or 4x4, got {}x{} and {}x{}",
            u_b0.rows(),
            u_b0.cols(),
            u_b1.rows(),
            u_b1.cols()
        ));
    }
    let proj = |k: usize| {
        let mut p = ComplexMatrix::zeros(n, n);
        p[(k, k)] = c(1.0, 0.0);
        p
    };
    let mut out = &tensor_product(u_b0, &proj(0)) + &tensor_product(u_b1, &proj(1));
    if n == 4 {
        let id = ComplexMatrix::identity(4);
        out = &out + &tensor_product(&id, &proj(2));
        out = &out + &tensor_product(&id, &proj(3));
    }
    Ok(out)
}

/// `𝒰` for the NOT gate: the exact rotation by `π/2 + δη` when B is `|0⟩` and
/// [`perturbed_u_chi`] when B is `|1⟩`.
pub fn not_composite(delta_eta: f64, chi: f64, period: f64, gamma: f64) -> ComplexMatrix {
    let eta = FRAC_PI_2 + delta_eta;
    composite_operator(&rotation(eta), &u_chi(eta, chi, period, gamma).u_chi).expect("2x2 blocks")
}

/// Phase picked up by `|11⟩` without a gate: `e^{−iχT}` for the bare coupling.
pub fn bare_phase(chi: f64, period: f64) -> C64 {
    C64::from_polar(1.0, -chi * period)
}
