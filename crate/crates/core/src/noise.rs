//! Piecewise-constant multiplicative noise on the Rabi amplitudes and the solid-angle error it
//! causes.
//!
//! Each amplitude is `Ωᵢ(t)(1 + Zᵢ(t))` with `Zᵢ` constant on boxes of length `τ` and drawn
//! independently from `N(0, σ²)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::looppath::LoopSpec;

/// Quadrature steps per noise box.
pub const STEPS_PER_BOX: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub tau: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, tau: f64, seed: u64) -> Result<Self> {
        let spec = Self { sigma, tau, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid!("σ must be non-negative, got {}", self.sigma));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid!("τ must be positive, got {}", self.tau));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Number of noise boxes `T/τ`, which must be a positive integer.
pub fn box_count(period: f64, tau: f64) -> Result<usize> {
    let n = period / tau;
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(invalid!("T/τ = {n} is not a positive integer"));
    }
    Ok(rounded as usize)
}

/// The three channels in basis order `0, 1, a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
    pub za: Vec<f64>,
    pub tau: f64,
}

impl NoiseRealization {
    pub fn zeros(n: usize, tau: f64) -> Self {
        Self {
            z0: vec![0.0; n],
            z1: vec![0.0; n],
            za: vec![0.0; n],
            tau,
        }
    }

    /// The same value in every box of each channel.
    pub fn constant(z: [f64; 3], n: usize, tau: f64) -> Self {
        Self {
            z0: vec![z[0]; n],
            z1: vec![z[1]; n],
            za: vec![z[2]; n],
            tau,
        }
    }

    pub fn boxes(&self) -> usize {
        self.z0.len()
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.z0, &self.z1, &self.za]
    }

    pub fn scaled(&self, k: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| k * x).collect();
        Self {
            z0: s(&self.z0),
            z1: s(&self.z1),
            za: s(&self.za),
            tau: self.tau,
        }
    }

    /// `Zᵢ(t) = Σₖ Zᵢₖ h((t − kτ)/τ)` with the box function `h` on `[0, 1)`. The last box is
    /// closed at `T`.
    pub fn value_at(&self, t: f64) -> [f64; 3] {
        let n = self.boxes();
        let k = ((t / self.tau).floor().max(0.0) as usize).min(n - 1);
        [self.z0[k], self.z1[k], self.za[k]]
    }
}

/// SplitMix64 finaliser of `base ⊕ golden·(index + 1)`: every trial gets its own stream and
/// adding trials never reshuffles earlier ones.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_noise(spec: &NoiseSpec, period: f64) -> Result<NoiseRealization> {
    spec.validate()?;
    let n = box_count(period, spec.tau)?;
    if spec.sigma == 0.0 {
        return Ok(NoiseRealization::zeros(n, spec.tau));
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| invalid!("{e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || (0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<_>>();
    let z0 = draw();
    let z1 = draw();
    let za = draw();
    Ok(NoiseRealization {
        z0,
        z1,
        za,
        tau: spec.tau,
    })
}

/// Realization for Monte-Carlo trial `index`, seeded by [`trial_seed`].
pub fn sample_noise_trial(spec: &NoiseSpec, period: f64, index: u64) -> Result<NoiseRealization> {
    sample_noise(&spec.with_seed(trial_seed(spec.seed, index)), period)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalDeltas {
    pub d_omega: f64,
    pub d_theta: f64,
    pub d_phi: f64,
}

/// First-order change of `(Ω, θ, φ)` under `Ωᵢ → Ωᵢ + δΩᵢ`.
pub fn spherical_deltas(rabi: [f64; 3], d_rabi: [f64; 3]) -> Result<SphericalDeltas> {
    let [w0, w1, wa] = rabi;
    let [d0, d1, da] = d_rabi;
    let rho2 = w0 * w0 + w1 * w1;
    if rho2 == 0.0 {
        return Err(invalid!("θ is singular on the polar axis"));
    }
    let om2 = rho2 + wa * wa;
    let om = om2.sqrt();
    Ok(SphericalDeltas {
        d_omega: (w0 * d0 + w1 * d1 + wa * da) / om,
        d_theta: (d0 * w0 * wa + d1 * w1 * wa + da * (wa * wa - om2)) / (om2 * rho2.sqrt()),
        d_phi: (w0 * d1 - w1 * d0) / rho2,
    })
}

/// `δη` as a linear functional of the noise: `δη = Σᵢₖ wᵢₖ Zᵢₖ`.
///
/// The weights integrate `−(φ̇ δθ − θ̇ δφ) sin θ` box by box and leg by leg with
/// [`STEPS_PER_BOX`] midpoint steps per box. This is the first variation of `∫ φ̇ cos θ dt`;
/// its boundary term vanishes because `δφ = 0` wherever `φ = 0`. An instantaneous leg carries
/// no noise and contributes nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaEtaKernel {
    weights: [Vec<f64>; 3],
    tau: f64,
    period: f64,
}

impl DeltaEtaKernel {
    pub fn new(spec: &LoopSpec, tau: f64) -> Result<Self> {
        spec.validate()?;
        let n = box_count(spec.period, tau)?;
        let mut weights = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let h_target = tau / STEPS_PER_BOX as f64;
        for seg in spec.segments().iter().filter(|s| s.duration() > 0.0) {
            let k_first = ((seg.t_start / tau).floor() as usize).min(n - 1);
            for k in k_first..n {
                let lo = seg.t_start.max(k as f64 * tau);
                let hi = seg.t_end.min((k + 1) as f64 * tau);
                if hi <= lo {
                    if k as f64 * tau >= seg.t_end {
                        break;
                    }
                    continue;
                }
                let m = ((hi - lo) / h_target).ceil().max(1.0) as usize;
                let h = (hi - lo) / m as f64;
                for j in 0..m {
                    let t = lo + (j as f64 + 0.5) * h;
                    let p = seg.point_at((t - seg.t_start) / seg.duration());
                    let rabi = crate::looppath::rabi_vector(p.theta, p.phi, spec.omega);
                    let sin = p.theta.sin();
                    for ch in 0..3 {
                        let mut d = [0.0; 3];
                        d[ch] = rabi[ch];
                        let del = spherical_deltas(rabi, d)?;
                        weights[ch][k] -=
                            (p.phi_dot * del.d_theta - p.theta_dot * del.d_phi) * sin * h;
                    }
                }
            }
        }
        Ok(Self {
            weights,
            tau,
            period: spec.period,
        })
    }

    pub fn boxes(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> [&[f64]; 3] {
        [&self.weights[0], &self.weights[1], &self.weights[2]]
    }

    pub fn apply(&self, noise: &NoiseRealization) -> Result<f64> {
        if noise.boxes() != self.boxes() || (noise.tau - self.tau).abs() > 1e-12 * self.tau {
            return Err(invalid!(
                "noise has {} boxes of {}, loop expects {} boxes of {}",
                noise.boxes(),
                noise.tau,
                self.boxes(),
                self.tau
            ));
        }
        Ok(self
            .weights
            .iter()
            .zip(noise.channels())
            .map(|(w, z)| w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .sum())
    }

    /// `Σ w²`, so that `Var(δη) = σ² Σ w²`.
    pub fn sum_sq(&self) -> f64 {
        self.weights.iter().flatten().map(|w| w * w).sum()
    }

    pub fn variance(&self, sigma: f64) -> f64 {
        sigma * sigma * self.sum_sq()
    }

    /// Loop-dependent constant `C` in `Var(δη) = C σ² τ/T`.
    pub fn cancellation_prefactor(&self) -> f64 {
        self.boxes() as f64 * self.sum_sq()
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// First-order solid-angle error of one noise realization along the loop.
pub fn delta_eta(spec: &LoopSpec, noise: &NoiseRealization) -> Result<f64> {
    let n = box_count(spec.period, noise.tau)?;
    if n != noise.boxes() {
        return Err(invalid!(
            "noise covers {} boxes but the loop needs {n}",
            noise.boxes()
        ));
    }
    DeltaEtaKernel::new(spec, noise.tau)?.apply(noise)
}

/// `σ √(τ/T)`, the prefactor-free size of the solid-angle error.
pub fn delta_eta_rms(sigma: f64, tau: f64, period: f64) -> f64 {
    sigma * (tau / period).sqrt()
}
