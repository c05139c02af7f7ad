//! Brute-force time-ordered propagation, the oracle for every closed-form operator.
//!
//! `ψ(T) = Πₖ exp(−i H(tₖ) Δt) ψ₀` with midpoint times `tₖ = (k + ½)Δt`. Each factor is
//! exactly unitary, so the norm does not drift over long adiabatic runs.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::holonomy::build_hamiltonian;
use crate::looppath::LoopSpec;
use crate::qmath::{c, hermitian_eig, tensor_product, ComplexMatrix, ComplexVector, C64, ZERO};

/// Steps per fastest time scale in [`default_steps`].
pub const STEPS_PER_FASTEST_SCALE: f64 = 200.0;

const HERMITIAN_SPOT_CHECKS: usize = 10;

type HamiltonianFn = dyn Fn(f64) -> ComplexMatrix + Send + Sync;

#[derive(Clone)]
pub struct Schedule {
    hamiltonian_at: Arc<HamiltonianFn>,
    dim: usize,
    period: f64,
    steps: usize,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schedule")
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("steps", &self.steps)
            .finish()
    }
}

impl Schedule {
    /// Checks dimension and Hermiticity of `H(t)` at ten times spread over `[0, T]`.
    pub fn new<F>(dim: usize, period: f64, steps: usize, hamiltonian_at: F) -> Result<Self>
    where
        F: Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    {
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid!("schedule duration must be positive, got {period}"));
        }
        if steps == 0 {
            return Err(invalid!("schedule needs at least one step"));
        }
        for k in 0..HERMITIAN_SPOT_CHECKS {
            let t = period * (k as f64 + 0.5) / HERMITIAN_SPOT_CHECKS as f64;
            let h = hamiltonian_at(t);
            if h.rows() != dim || h.cols() != dim {
                return Err(invalid!(
                    "H({t}) is {}x{}, expected {dim}x{dim}",
                    h.rows(),
                    h.cols()
                ));
            }
            let err = h.hermiticity_error();
            if err > 1e-10 * h.max_abs().max(1.0) {
                return Err(invalid!("H({t}) is not Hermitian (asymmetry {err:e})"));
            }
        }
        Ok(Self {
            hamiltonian_at: Arc::new(hamiltonian_at),
            dim,
            period,
            steps,
        })
    }

    pub fn constant(h: ComplexMatrix, period: f64, steps: usize) -> Result<Self> {
        Self::new(h.rows(), period, steps, move |_| h.clone())
    }

    /// `H₀(t)` along the loop.
    pub fn single_loop(spec: &LoopSpec, steps: usize) -> Result<Self> {
        spec.validate()?;
        let s = *spec;
        Self::new(4, spec.period, steps, move |t| {
            build_hamiltonian(s.rabi_at(t.clamp(0.0, s.period)).expect("t is clamped"))
        })
    }

    /// `H₀(t) ⊗ I + χ |11⟩⟨11|` on the A-major 16-dimensional pair.
    pub fn coupled_loop(spec: &LoopSpec, chi: f64, steps: usize) -> Result<Self> {
        spec.validate()?;
        let s = *spec;
        let id = ComplexMatrix::identity(4);
        let coupling = interaction_hamiltonian(chi);
        Self::new(16, spec.period, steps, move |t| {
            let h0 = build_hamiltonian(s.rabi_at(t.clamp(0.0, s.period)).expect("t is clamped"));
            &tensor_product(&h0, &id) + &coupling
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid!("schedule needs at least one step"));
        }
        Ok(Self {
            steps,
            ..self.clone()
        })
    }

    pub fn hamiltonian_at(&self, t: f64) -> ComplexMatrix {
        (self.hamiltonian_at)(t)
    }
}

/// `χ |11⟩⟨11|` on the 16-dimensional pair (index `4·1 + 1`).
pub fn interaction_hamiltonian(chi: f64) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(16, 16);
    h[(5, 5)] = c(chi, 0.0);
    h
}

/// `⌈200 · T / min(1/Ω, τ)⌉`.
pub fn default_steps(period: f64, omega: f64, tau: Option<f64>) -> usize {
    let fastest = tau.map_or(1.0 / omega, |t| t.min(1.0 / omega));
    (STEPS_PER_FASTEST_SCALE * period / fastest).ceil().max(1.0) as usize
}

/// Evolves several initial vectors through the same schedule. Each step diagonalises `H(tₖ)`
/// once and applies `V e^{−iΛΔt} V†` to every column.
pub fn propagate_many(sched: &Schedule, initial: &[ComplexVector]) -> Result<Vec<ComplexVector>> {
    let n = sched.dim;
    if let Some(v) = initial.iter().find(|v| v.dim() != n) {
        return Err(invalid!(
            "initial state has dimension {}, schedule has {n}",
            v.dim()
        ));
    }
    let mut states: Vec<Vec<C64>> = initial.iter().map(|v| v.entries().to_vec()).collect();
    let dt = sched.period / sched.steps as f64;
    let mut scratch = vec![ZERO; n];
    for k in 0..sched.steps {
        let h = sched.hamiltonian_at((k as f64 + 0.5) * dt);
        let eig = hermitian_eig(&h)?;
        let v = &eig.vectors;
        let phases: Vec<C64> = eig
            .values
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * dt))
            .collect();
        for psi in states.iter_mut() {
            for (j, s) in scratch.iter_mut().enumerate() {
                let mut acc = ZERO;
                for i in 0..n {
                    acc += v[(i, j)].conj() * psi[i];
                }
                *s = acc * phases[j];
            }
            for (i, out) in psi.iter_mut().enumerate() {
                let mut acc = ZERO;
                for j in 0..n {
                    acc += v[(i, j)] * scratch[j];
                }
                *out = acc;
            }
        }
    }
    Ok(states.into_iter().map(ComplexVector::new).collect())
}

pub fn propagate(sched: &Schedule, psi0: &ComplexVector) -> Result<ComplexVector> {
    Ok(propagate_many(sched, std::slice::from_ref(psi0))?.remove(0))
}

#[derive(Clone, Debug)]
pub struct GateEstimate {
    /// `Mᵢⱼ = ⟨basisᵢ|ψⱼ(T)⟩`.
    pub matrix: ComplexMatrix,
    /// `1 − ‖column j‖²`, the weight that left the span of the basis.
    pub leakage: Vec<f64>,
}

impl GateEstimate {
    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }
}

/// The operator the schedule induces on the span of `logical_basis`.
pub fn propagate_gate(sched: &Schedule, logical_basis: &[ComplexVector]) -> Result<GateEstimate> {
    let k = logical_basis.len();
    if k == 0 {
        return Err(invalid!("logical basis is empty"));
    }
    for (i, a) in logical_basis.iter().enumerate() {
        for (j, b) in logical_basis.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if a.dim() != sched.dim || (a.inner(b) - c(expect, 0.0)).norm() > 1e-10 {
                return Err(invalid!(
                    "logical basis must be orthonormal in dimension {}",
                    sched.dim
                ));
            }
        }
    }
    let finals = propagate_many(sched, logical_basis)?;
    let mut matrix = ComplexMatrix::zeros(k, k);
    let mut leakage = Vec::with_capacity(k);
    for (j, psi) in finals.iter().enumerate() {
        let mut kept = 0.0;
        for (i, b) in logical_basis.iter().enumerate() {
            matrix[(i, j)] = b.inner(psi);
            kept += matrix[(i, j)].norm_sqr();
        }
        leakage.push((psi.norm_sqr() - kept).max(0.0));
    }
    Ok(GateEstimate { matrix, leakage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomy::holonomy_operator;
    use crate::qmath::{expm_hermitian, test_support::random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn logical_pair() -> Vec<ComplexVector> {
        vec![ComplexVector::basis(4, 0), ComplexVector::basis(4, 1)]
    }

    #[test]
    fn constant_hamiltonian_matches_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hermitian(&mut rng, 4);
        let psi0 = ComplexVector::basis(4, 2);
        let sched = Schedule::constant(h.clone(), 3.0, 37).unwrap();
        let got = propagate(&sched, &psi0).unwrap();
        let expect = expm_hermitian(&h, 3.0).unwrap().mul_vec(&psi0);
        assert!(got.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let sched = Schedule::constant(ComplexMatrix::zeros(4, 4), 5.0, 10).unwrap();
        let psi0 = ComplexVector::from_real(&[0.6, 0.0, 0.8, 0.0]);
        assert!(propagate(&sched, &psi0).unwrap().max_abs_diff(&psi0) < 1e-15);
        let g = propagate_gate(&sched, &logical_pair()).unwrap();
        assert!(g.matrix.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        assert_eq!(g.max_leakage(), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        let sched = Schedule::constant(ComplexMatrix::zeros(4, 4), 1.0, 1).unwrap();
        assert!(propagate(&sched, &ComplexVector::basis(2, 0)).is_err());
        let not_orthonormal = vec![ComplexVector::basis(4, 0), ComplexVector::basis(4, 0)];
        assert!(propagate_gate(&sched, &not_orthonormal).is_err());
        let skew = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(Schedule::constant(skew, 1.0, 1).is_err());
        assert!(Schedule::constant(ComplexMatrix::zeros(2, 2), 1.0, 0).is_err());
        assert!(Schedule::new(4, 1.0, 1, |_| ComplexMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn norm_is_preserved() {
        let spec = LoopSpec::not_gate(FRAC_PI_3, 20.0, 1.0).unwrap();
        let sched = Schedule::single_loop(&spec, 2000).unwrap();
        let psi = propagate(&sched, &ComplexVector::basis(4, 0)).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn not_loop_at_large_omega_t() {
        let spec = LoopSpec::not_gate(FRAC_PI_3, 500.0, 1.0).unwrap();
        let sched = Schedule::single_loop(&spec, 50_000).unwrap();
        let g = propagate_gate(&sched, &logical_pair()).unwrap();
        let not = holonomy_operator(FRAC_PI_2).matrix;
        assert!(g.matrix.max_abs_diff(&not) < 2e-2, "{}", g.matrix);
        assert!(g.max_leakage() < 2e-2);
        let psi = propagate(&sched, &ComplexVector::basis(4, 0)).unwrap();
        assert!((psi[0] - not[(0, 0)]).norm() < 2e-2 && (psi[1] - not[(1, 0)]).norm() < 2e-2);
    }

    #[test]
    fn step_halving_converges_at_second_order() {
        let spec = LoopSpec::not_gate(FRAC_PI_3, 30.0, 1.0).unwrap();
        let sched = Schedule::single_loop(&spec, 400).unwrap();
        let g = |s: usize| {
            propagate_gate(&sched.with_steps(s).unwrap(), &logical_pair())
                .unwrap()
                .matrix
        };
        let (a, b, c) = (g(400), g(800), g(1600));
        let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
        assert!(ratio > 3.0, "ratio {ratio}");
    }

    #[test]
    fn coupled_schedule_is_block_diagonal_in_b() {
        let spec = LoopSpec::equator(10.0, 1.0).unwrap();
        let sched = Schedule::coupled_loop(&spec, 0.3, 10).unwrap();
        let h = sched.hamiltonian_at(3.3);
        for i in 0..16 {
            for j in 0..16 {
                if i % 4 != j % 4 {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
        }
        assert_eq!(h[(5, 5)], c(0.3, 0.0));
    }

    #[test]
    fn default_step_rule() {
        assert_eq!(default_steps(500.0, 1.0, None), 100_000);
        assert_eq!(default_steps(10.0, 1.0, Some(0.5)), 4000);
        assert_eq!(default_steps(10.0, 10.0, Some(0.5)), 20_000);
    }
}
