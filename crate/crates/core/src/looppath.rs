//! The rectangular meridian/parallel loop on the Rabi sphere.
//!
//! The loop runs `(θ_m, 0) → (θ_M, 0) → (θ_M, ±φ_M) → (θ_m, ±φ_M) → (θ_m, 0)`, each leg at
//! constant angular speed. The sign of the azimuth on the upper parallel is set by
//! [`AzimuthDirection`]; the default sweeps φ downwards, which makes the ideal holonomy the
//! rotation `[[cos η, sin η], [−sin η, cos η]]` with `η = φ_M (cos θ_m − cos θ_M)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_THETA_MIN: f64 = 1e-3;

/// Solid angle of the NOT gate.
pub const NOT_SOLID_ANGLE: f64 = FRAC_PI_2;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AzimuthDirection {
    /// φ goes `0 → −φ_M` on the upper parallel.
    #[default]
    Decreasing,
    /// φ goes `0 → +φ_M` on the upper parallel.
    Increasing,
}

impl AzimuthDirection {
    pub fn sign(self) -> f64 {
        match self {
            Self::Decreasing => -1.0,
            Self::Increasing => 1.0,
        }
    }
}

/// Durations of the four legs as fractions of `T`.
///
/// Legs 1 to 3 must take positive time. Leg 4 (the parallel at `θ_m`) may be instantaneous:
/// near the pole it only rotates the drive by a vector of length `≤ 2Ω sin θ_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct SegmentTiming([f64; 4]);

impl SegmentTiming {
    pub fn new(fractions: [f64; 4]) -> Result<Self> {
        if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(invalid!(
                "segment fractions must be non-negative, got {fractions:?}"
            ));
        }
        if fractions[..3].contains(&0.0) {
            return Err(invalid!(
                "legs 1 to 3 need positive duration, got {fractions:?}"
            ));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid!("segment fractions must sum to 1, got {sum}"));
        }
        Ok(Self(fractions))
    }

    /// Four legs of `T/4`.
    pub fn equal() -> Self {
        Self([0.25; 4])
    }

    /// Legs 1 to 3 take `T/3` each and the return along the polar parallel is instantaneous.
    /// This is the timing under which the closed-form γ factor is the time average of the
    /// coupling eigenvalue.
    pub fn pole_collapsed() -> Self {
        Self([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0])
    }

    pub fn fractions(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for SegmentTiming {
    fn default() -> Self {
        Self::equal()
    }
}

impl TryFrom<[f64; 4]> for SegmentTiming {
    type Error = crate::Error;
    fn try_from(value: [f64; 4]) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SegmentTiming> for [f64; 4] {
    fn from(value: SegmentTiming) -> Self {
        value.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub theta: f64,
    pub phi: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
}

/// One leg of the loop, linear in time from `from` to `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `(θ, φ)` at `t_start`.
    pub from: (f64, f64),
    /// `(θ, φ)` at `t_end`.
    pub to: (f64, f64),
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn is_meridian(&self) -> bool {
        self.index.is_multiple_of(2)
    }

    /// Angles at fractional position `s ∈ [0, 1]` along the leg. Rates are zero on an
    /// instantaneous leg.
    pub fn point_at(&self, s: f64) -> AnglePoint {
        let (th0, ph0) = self.from;
        let (th1, ph1) = self.to;
        let d = self.duration();
        let (theta_dot, phi_dot) = if d > 0.0 {
            ((th1 - th0) / d, (ph1 - ph0) / d)
        } else {
            (0.0, 0.0)
        };
        AnglePoint {
            theta: th0 + s * (th1 - th0),
            phi: ph0 + s * (ph1 - ph0),
            theta_dot,
            phi_dot,
        }
    }

    /// `∫ cos θ dφ` along the leg, independent of its duration.
    pub fn azimuthal_area(&self) -> f64 {
        if self.is_meridian() {
            0.0
        } else {
            self.from.0.cos() * (self.to.1 - self.from.1)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_max: f64,
    /// Loop duration `T`.
    pub period: f64,
    /// Rabi magnitude `Ω`.
    pub omega: f64,
    #[serde(default)]
    pub timing: SegmentTiming,
    #[serde(default)]
    pub direction: AzimuthDirection,
}

impl LoopSpec {
    /// A loop with the default `θ_m`, equal legs and decreasing azimuth.
    pub fn new(theta_max: f64, phi_max: f64, period: f64, omega: f64) -> Result<Self> {
        Self {
            theta_min: DEFAULT_THETA_MIN,
            theta_max,
            phi_max,
            period,
            omega,
            timing: SegmentTiming::equal(),
            direction: AzimuthDirection::Decreasing,
        }
        .validated()
    }

    /// The NOT loop with the given `θ_M`: `φ_M = (π/2)/(1 − cos θ_M)`.
    pub fn not_gate(theta_max: f64, period: f64, omega: f64) -> Result<Self> {
        Self::new(theta_max, not_gate_phi_max(theta_max)?, period, omega)
    }

    /// The equator loop `θ_M = φ_M = π/2`, insensitive to amplitude noise.
    pub fn equator(period: f64, omega: f64) -> Result<Self> {
        Self::new(FRAC_PI_2, FRAC_PI_2, period, omega)
    }

    pub fn with_theta_min(mut self, theta_min: f64) -> Result<Self> {
        self.theta_min = theta_min;
        self.validated()
    }

    pub fn with_timing(mut self, timing: SegmentTiming) -> Self {
        self.timing = timing;
        self
    }

    pub fn with_direction(mut self, direction: AzimuthDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        self.period = period;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            theta_min,
            theta_max,
            phi_max,
            period,
            omega,
            timing,
            ..
        } = *self;
        if !(theta_min > 0.0 && theta_min < theta_max && theta_max <= FRAC_PI_2 + 1e-12) {
            return Err(invalid!(
                "need 0 < θ_m < θ_M ≤ π/2, got θ_m = {theta_min}, θ_M = {theta_max}"
            ));
        }
        if !(phi_max > 0.0 && phi_max <= TWO_PI + 1e-12) {
            return Err(invalid!("need 0 < φ_M ≤ 2π, got {phi_max}"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid!("loop duration must be positive, got {period}"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid!("Rabi magnitude must be positive, got {omega}"));
        }
        SegmentTiming::new(timing.0)?;
        Ok(())
    }

    /// Signed azimuth of the upper parallel's far end.
    pub fn phi_end(&self) -> f64 {
        self.direction.sign() * self.phi_max
    }

    pub fn segments(&self) -> [Segment; 4] {
        let f = self.timing.0;
        // trailing zero-length legs end exactly at T
        let mut bounds = [0.0; 5];
        for k in 0..4 {
            let rest: f64 = f[k + 1..].iter().sum();
            bounds[k + 1] = if rest == 0.0 {
                self.period
            } else {
                bounds[k] + f[k] * self.period
            };
        }
        let (lo, hi, p) = (self.theta_min, self.theta_max, self.phi_end());
        let corners = [(lo, 0.0), (hi, 0.0), (hi, p), (lo, p), (lo, 0.0)];
        std::array::from_fn(|k| Segment {
            index: k,
            t_start: bounds[k],
            t_end: bounds[k + 1],
            from: corners[k],
            to: corners[k + 1],
        })
    }

    pub fn angles_at(&self, t: f64) -> Result<AnglePoint> {
        if !(0.0..=self.period).contains(&t) {
            return Err(invalid!("time {t} outside [0, {}]", self.period));
        }
        let segments = self.segments();
        if t == self.period {
            let last = segments
                .iter()
                .rev()
                .find(|s| s.duration() > 0.0)
                .expect("leg 1 is positive");
            let mut end = last.point_at(1.0);
            end.theta = self.theta_min;
            end.phi = 0.0;
            return Ok(end);
        }
        let seg = segments
            .iter()
            .find(|s| s.duration() > 0.0 && t < s.t_end)
            .expect("t < T lies in some leg");
        Ok(seg.point_at((t - seg.t_start) / seg.duration()))
    }

    pub fn rabi_at(&self, t: f64) -> Result<[f64; 3]> {
        let p = self.angles_at(t)?;
        Ok(rabi_vector(p.theta, p.phi, self.omega))
    }

    /// `φ_M (1 − cos θ_M)`, the enclosed solid angle in the `θ_m → 0` limit.
    pub fn solid_angle(&self) -> f64 {
        self.phi_max * (1.0 - self.theta_max.cos())
    }

    /// `φ_M (cos θ_m − cos θ_M)`, the solid angle at the actual `θ_m`.
    pub fn solid_angle_regularized(&self) -> f64 {
        self.phi_max * (self.theta_min.cos() - self.theta_max.cos())
    }

    /// `∮ cos θ dφ` summed leg by leg. Equals the signed regularized solid angle.
    pub fn azimuthal_area(&self) -> f64 {
        self.segments().iter().map(Segment::azimuthal_area).sum()
    }

    /// Midpoint samples `(t, dt, point)` with `steps_per_leg` samples on each leg of positive
    /// duration.
    pub fn midpoint_samples(&self, steps_per_leg: usize) -> Vec<(f64, f64, AnglePoint)> {
        assert!(steps_per_leg > 0);
        let mut out = Vec::with_capacity(4 * steps_per_leg);
        for seg in self.segments().iter().filter(|s| s.duration() > 0.0) {
            let dt = seg.duration() / steps_per_leg as f64;
            for k in 0..steps_per_leg {
                let s = (k as f64 + 0.5) / steps_per_leg as f64;
                out.push((seg.t_start + s * seg.duration(), dt, seg.point_at(s)));
            }
        }
        out
    }

    /// Composite Simpson rule for `∫₀ᵀ f dt`, applied leg by leg so the kinks at the corners
    /// do not spoil the order. `intervals_per_leg` is rounded up to an even number.
    pub fn integrate<F: Fn(&AnglePoint) -> f64>(&self, intervals_per_leg: usize, f: F) -> f64 {
        let n = (intervals_per_leg.max(2) + 1) & !1;
        self.segments()
            .iter()
            .filter(|s| s.duration() > 0.0)
            .map(|seg| {
                let h = seg.duration() / n as f64;
                let mut acc = f(&seg.point_at(0.0)) + f(&seg.point_at(1.0));
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * f(&seg.point_at(k as f64 / n as f64));
                }
                acc * h / 3.0
            })
            .sum()
    }
}

/// `(Ω sin θ cos φ, Ω sin θ sin φ, Ω cos θ)`
pub fn rabi_vector(theta: f64, phi: f64, omega: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [omega * st * cp, omega * st * sp, omega * ct]
}

/// `(π/2)/(1 − cos θ_M)`, rejected when it exceeds `2π`.
pub fn not_gate_phi_max(theta_max: f64) -> Result<f64> {
    if !(theta_max > 0.0 && theta_max <= FRAC_PI_2 + 1e-12) {
        return Err(invalid!("need 0 < θ_M ≤ π/2, got {theta_max}"));
    }
    let phi = NOT_SOLID_ANGLE / (1.0 - theta_max.cos());
    if phi > TWO_PI + 1e-12 {
        return Err(invalid!(
            "NOT loop at θ_M = {theta_max} needs φ_M = {phi} > 2π"
        ));
    }
    Ok(phi)
}

/// Smallest `θ_M` whose NOT loop fits in `φ_M ≤ 2π`.
pub fn not_gate_theta_floor() -> f64 {
    (1.0 - NOT_SOLID_ANGLE / TWO_PI).acos()
}
