//! Dark and bright eigenbases of the tripod Hamiltonian, the Wilczek–Zee connection and the
//! logical operators it generates.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use log::warn;

use crate::error::{invalid, Result};
use crate::looppath::{AnglePoint, LoopSpec};
use crate::qmath::{c, ComplexMatrix, ComplexVector, ONE, ZERO};

/// Basis indices of the single system.
pub const KET_0: usize = 0;
pub const KET_1: usize = 1;
pub const KET_A: usize = 2;
pub const KET_G: usize = 3;

/// Above this size the second-order expansion of the perturbed NOT is no longer meaningful.
pub const SMALL_DELTA_ETA: f64 = 0.3;

/// `H₀ = Σᵢ Ωᵢ (|i⟩⟨G| + |G⟩⟨i|)` over `i ∈ {0, 1, a}`.
pub fn build_hamiltonian(rabi: [f64; 3]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(4, 4);
    for (i, &w) in rabi.iter().enumerate() {
        h[(i, KET_G)] = c(w, 0.0);
        h[(KET_G, i)] = c(w, 0.0);
    }
    h
}

/// Polar and azimuthal angles of a Rabi vector: `θ = arccos(Ω_a/Ω)`, `φ = atan2(Ω₁, Ω₀)`.
/// On the polar axis `φ = 0`.
pub fn rabi_angles(rabi: [f64; 3]) -> Result<(f64, f64, f64)> {
    let omega = rabi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if omega == 0.0 || !omega.is_finite() {
        return Err(invalid!("Rabi vector {rabi:?} has no direction"));
    }
    let theta = (rabi[2] / omega).clamp(-1.0, 1.0).acos();
    let phi = rabi[1].atan2(rabi[0]);
    Ok((theta, phi, omega))
}

#[derive(Clone, Debug)]
pub struct EigenFrame {
    pub d1: ComplexVector,
    pub d2: ComplexVector,
    pub b1: ComplexVector,
    pub b2: ComplexVector,
    pub omega: f64,
}

impl EigenFrame {
    pub fn from_angles(theta: f64, phi: f64, omega: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let n = [st * cp, st * sp, ct];
        let d1 = ComplexVector::from_real(&[ct * cp, ct * sp, -st, 0.0]);
        let d2 = ComplexVector::from_real(&[-sp, cp, 0.0, 0.0]);
        let r = FRAC_1_SQRT_2;
        let b1 = ComplexVector::from_real(&[r * n[0], r * n[1], r * n[2], r]);
        let b2 = ComplexVector::from_real(&[r * n[0], r * n[1], r * n[2], -r]);
        Self {
            d1,
            d2,
            b1,
            b2,
            omega,
        }
    }

    /// Energies of `(d1, d2, b1, b2)`.
    pub fn energies(&self) -> [f64; 4] {
        [0.0, 0.0, self.omega, -self.omega]
    }

    pub fn vectors(&self) -> [&ComplexVector; 4] {
        [&self.d1, &self.d2, &self.b1, &self.b2]
    }

    /// Columns `(d1, d2, b1, b2)`.
    pub fn as_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&[
            self.d1.clone(),
            self.d2.clone(),
            self.b1.clone(),
            self.b2.clone(),
        ])
    }
}

/// Instantaneous eigenbasis of [`build_hamiltonian`]. On the polar axis this is the limit
/// `D₁ = |0⟩, D₂ = |1⟩, B₁,₂ = (|a⟩ ± |G⟩)/√2`.
pub fn eigen_frame(rabi: [f64; 3]) -> Result<EigenFrame> {
    let (theta, phi, omega) = rabi_angles(rabi)?;
    Ok(EigenFrame::from_angles(theta, phi, omega))
}

/// Dark states at `Ωᵢ + δΩᵢ`.
pub fn perturbed_dark_frame(
    rabi: [f64; 3],
    d_rabi: [f64; 3],
) -> Result<(ComplexVector, ComplexVector)> {
    let shifted = std::array::from_fn(|k| rabi[k] + d_rabi[k]);
    let frame = eigen_frame(shifted)?;
    Ok((frame.d1, frame.d2))
}

/// `A = [[0, −φ̇ cos θ], [φ̇ cos θ, 0]]`, the connection `Aᵢⱼ = ⟨Dᵢ|∂ₜDⱼ⟩`.
pub fn connection_at(point: &AnglePoint) -> ComplexMatrix {
    let a = point.phi_dot * point.theta.cos();
    ComplexMatrix::from_real_rows(&[&[0.0, -a], &[a, 0.0]])
}

/// `[[cos η, sin η], [−sin η, cos η]]`, the solution of `ċ = −A c` for accumulated
/// `∫ φ̇ cos θ dt = η`.
pub fn rotation(eta: f64) -> ComplexMatrix {
    let (s, co) = eta.sin_cos();
    ComplexMatrix::from_real_rows(&[&[co, s], &[-s, co]])
}

#[derive(Clone, Debug)]
pub struct LogicalGate {
    pub matrix: ComplexMatrix,
    pub eta: f64,
}

pub fn holonomy_operator(eta: f64) -> LogicalGate {
    LogicalGate {
        matrix: rotation(eta),
        eta,
    }
}

/// The NOT gate with a solid-angle error, expanded to second order:
/// `[[−δη − δ²η, 1 − δη²/2], [−1 + δη²/2, −δη − δ²η]]`.
pub fn perturbed_operator(delta_eta: f64, delta2_eta: f64) -> LogicalGate {
    if delta_eta.abs() > SMALL_DELTA_ETA {
        warn!("δη = {delta_eta} is outside the range of the second-order expansion");
    }
    let d = -delta_eta - delta2_eta;
    let o = 1.0 - 0.5 * delta_eta * delta_eta;
    LogicalGate {
        matrix: ComplexMatrix::from_real_rows(&[&[d, o], &[-o, d]]),
        eta: FRAC_PI_2 + delta_eta + delta2_eta,
    }
}

/// The NOT gate with the solid-angle error kept exactly.
pub fn perturbed_operator_exact(delta_eta: f64) -> LogicalGate {
    holonomy_operator(FRAC_PI_2 + delta_eta)
}

/// `𝒯 Π exp(−A(tₖ) Δt)` over midpoint samples of the loop. An instantaneous leg contributes
/// its finite rotation `∫ cos θ dφ`.
pub fn path_ordered_holonomy(spec: &LoopSpec, steps_per_leg: usize) -> ComplexMatrix {
    let mut u = ComplexMatrix::identity(2);
    for seg in spec.segments() {
        if seg.duration() == 0.0 {
            u = &rotation(seg.azimuthal_area()) * &u;
            continue;
        }
        let dt = seg.duration() / steps_per_leg as f64;
        for k in 0..steps_per_leg {
            let p = seg.point_at((k as f64 + 0.5) / steps_per_leg as f64);
            u = &antisymmetric_step(&connection_at(&p), dt) * &u;
        }
    }
    u
}

/// `exp(−A dt)` for a real antisymmetric 2×2 `A`.
fn antisymmetric_step(a: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    rotation(a[(1, 0)].re * dt)
}

/// Lifts a logical operator written in the orthonormal pair `(e₁, e₂)` to the single-system
/// space, acting as the identity on the orthogonal complement.
pub fn lift_from_pair(u: &ComplexMatrix, e1: &ComplexVector, e2: &ComplexVector) -> ComplexMatrix {
    assert_eq!((u.rows(), u.cols()), (2, 2));
    let basis = [e1, e2];
    let mut out = ComplexMatrix::identity(e1.dim());
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let delta = if i == j { ONE } else { ZERO };
            let term = bi.outer(bj).scale(u[(i, j)] - delta);
            out = &out + &term;
        }
    }
    out
}

/// `U ⊕ I` on the single system: the logical block acts on `{|0⟩, |1⟩}`.
pub fn embed_logical(u: &ComplexMatrix) -> ComplexMatrix {
    lift_from_pair(
        u,
        &ComplexVector::basis(4, KET_0),
        &ComplexVector::basis(4, KET_1),
    )
}
