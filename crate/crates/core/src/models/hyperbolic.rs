//! Euler-discretised hyperbolic diffusion `dX = −X/√(1+X²) dt + dW` kept
//! inside a corridor whose edges interpolate linearly between `(l₀, u₀)` at
//! time 0 and `(l_t, u_t)` at time `t`.
//!
//! The estimated quantity is the probability that a chain started from the
//! hyperbolic law `π(x) = e^{−√(1+x²)} / (2K₁(1))` lies in `(l₀, u₀)`, stays
//! strictly inside the corridor at every grid time and ends in `(l_t, u_t)`.
//! Reverse proposals draw the predecessor from `π(x) P_Δ(x, y)` restricted to
//! the corridor, with a rejection sampler built on the inverse drift map.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, ProposalError, Result};
use crate::numerics::{bessel_k1, integrate, QuadratureTolerance};
use crate::scalar::Real;
use crate::smc::{ReverseModel, ReverseStep};

/// Reference value of `K₁(1)`.
pub const BESSEL_K1_AT_ONE: f64 = 0.601_907_230_197_234_6;

fn k1_at_one() -> f64 {
    static K1: OnceLock<f64> = OnceLock::new();
    *K1.get_or_init(|| bessel_k1(1.0_f64).expect("K1(1) quadrature"))
}

/// Hyperbolic stationary density.
pub fn stationary_density<F: Real>(x: F) -> F {
    (-(F::one() + x * x).sqrt()).exp() / F::lit(2.0 * k1_at_one())
}

pub fn ln_stationary_density<F: Real>(x: F) -> F {
    -(F::one() + x * x).sqrt() - F::lit((2.0 * k1_at_one()).ln())
}

/// Euler mean `m(x) = x (1 − Δ/√(1+x²))`.
pub fn drift_map<F: Real>(x: F, delta: F) -> F {
    x * (F::one() - delta / (F::one() + x * x).sqrt())
}

/// `m'(x) = 1 − Δ (1+x²)^{−3/2}`, which lies in `[1−Δ, 1)`.
pub fn drift_map_derivative<F: Real>(x: F, delta: F) -> F {
    let s = F::one() + x * x;
    F::one() - delta / (s * s.sqrt())
}

fn gaussian_ln_density<F: Real>(z: F, variance: F) -> F {
    -F::lit(0.5) * (z * z / variance + (F::lit(2.0) * F::PI() * variance).ln())
}

/// Euler transition density `P_Δ(x, y)`: Gaussian in `y` with mean `m(x)`
/// and variance `Δ`.
pub fn euler_forward_density<F: Real>(x: F, y: F, delta: F) -> F {
    gaussian_ln_density(y - drift_map(x, delta), delta).exp()
}

pub fn ln_euler_forward_density<F: Real>(x: F, y: F, delta: F) -> F {
    gaussian_ln_density(y - drift_map(x, delta), delta)
}

/// One forward Euler step.
pub fn euler_step<F: Real, R: Rng + ?Sized>(x: F, delta: F, rng: &mut R) -> F {
    drift_map(x, delta) + delta.sqrt() * F::sample_std_normal(rng)
}

/// Solves `m(x) = target` for `Δ ∈ (0, 1)`, where `m` is strictly increasing.
///
/// Newton iterations safeguarded by the bracket `[v, v/(1−Δ)]` (for
/// `v ≥ 0`; the map is odd), falling back to bisection when a Newton step
/// leaves the bracket.
pub fn invert_drift_map<F: Real>(target: F, delta: F) -> Result<F> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::InvalidParams("drift inversion needs 0 < Δ < 1".into()));
    }
    if !target.is_finite() {
        return Err(Error::Numerical("non-finite drift target".into()));
    }
    let v = target.abs();
    if v == F::zero() {
        return Ok(F::zero());
    }
    let tol = F::lit(1e-12).max(F::lit(8.0) * F::epsilon() * v);
    let (mut lo, mut hi) = (v, v / (F::one() - delta));
    let mut x = v + delta * v / (F::one() + v * v).sqrt();
    for _ in 0..200 {
        let r = drift_map(x, delta) - v;
        if r.abs() <= tol {
            return Ok(x.copysign(target));
        }
        if r > F::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let next = x - r / drift_map_derivative(x, delta);
        x = if next > lo && next < hi { next } else { F::lit(0.5) * (lo + hi) };
        if hi - lo <= F::epsilon() * hi {
            return Ok(x.copysign(target));
        }
    }
    Err(Error::Numerical(format!(
        "drift inversion did not converge for target {}",
        target.to_f64_lossy()
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripParams<F> {
    pub l0: F,
    pub u0: F,
    pub lt: F,
    pub ut: F,
    /// Horizon `t`.
    pub horizon: F,
    /// Euler step `Δ`; must divide the horizon.
    pub delta: F,
}

impl<F: Real> StripParams<F> {
    pub fn new(l0: F, u0: F, lt: F, ut: F, horizon: F, delta: F) -> Result<Self> {
        let p = Self {
            l0,
            u0,
            lt,
            ut,
            horizon,
            delta,
        };
        p.steps()?;
        Ok(p)
    }

    /// Number of Euler steps `t/Δ`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.l0 < self.u0) || !(self.lt < self.ut) {
            return Err(Error::InvalidParams("strip bounds need l < u at both ends".into()));
        }
        if !(self.delta > F::zero() && self.delta < F::one()) {
            return Err(Error::InvalidParams("delta must lie in (0, 1)".into()));
        }
        if !(self.horizon > F::zero() && self.horizon.is_finite()) {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        let ratio = self.horizon / self.delta;
        let n = ratio.round();
        if (ratio - n).abs() > F::lit(1e-6).max(F::lit(100.0) * F::epsilon() * ratio) || n < F::one() {
            return Err(Error::InvalidParams("delta must divide the horizon".into()));
        }
        n.to_usize()
            .ok_or_else(|| Error::InvalidParams("too many steps".into()))
    }
}

/// Corridor edges at grid index `step` of `steps`.
pub fn strip_bounds<F: Real>(step: usize, steps: usize, p: &StripParams<F>) -> (F, F) {
    let frac = F::from_count(step) / F::from_count(steps);
    (p.l0 + (p.lt - p.l0) * frac, p.u0 + (p.ut - p.u0) * frac)
}

/// `∫_{a}^{b} π(x) dx`.
pub fn stationary_mass<F: Real>(a: F, b: F) -> Result<F> {
    Ok(integrate(stationary_density::<F>, a, b, QuadratureTolerance::absolute(1e-12))?.value)
}

/// `ln` of the tightest bound `sup_{x∈(a,b)} e^{−√(1+x²)}`.
fn envelope_exponent<F: Real>(a: F, b: F) -> F {
    let d = if a > F::zero() {
        a
    } else if b < F::zero() {
        -b
    } else {
        F::zero()
    };
    (F::one() + d * d).sqrt()
}

/// Draws from `π` restricted to `(a, b)` by rejection from the uniform law.
pub fn sample_truncated_stationary<F: Real, R: Rng + ?Sized>(a: F, b: F, rng: &mut R) -> Result<F> {
    let h_min = envelope_exponent(a, b);
    for _ in 0..1_000_000 {
        let x = a + (b - a) * F::sample_unit(rng);
        if F::sample_unit(rng) < (h_min - (F::one() + x * x).sqrt()).exp() && x > a {
            return Ok(x);
        }
    }
    Err(Error::SamplerExhausted {
        attempts: 1_000_000,
        detail: "truncated hyperbolic law".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffState<F> {
    /// Grid index `s`; the time is `s·Δ`.
    pub step: usize,
    pub x: F,
}

impl<F> DiffState<F> {
    pub fn new(step: usize, x: F) -> Self {
        Self { step, x }
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicModel<F> {
    params: StripParams<F>,
    steps: usize,
    quadrature: QuadratureTolerance,
    max_attempts: usize,
}

impl<F: Real> HyperbolicModel<F> {
    pub fn new(params: StripParams<F>) -> Result<Self> {
        let steps = params.steps()?;
        Ok(Self {
            params,
            steps,
            quadrature: QuadratureTolerance::absolute(1e-9),
            max_attempts: 100_000,
        })
    }

    /// Absolute tolerance for the proposal normaliser.
    pub fn with_quadrature_tolerance(mut self, abs: f64) -> Self {
        self.quadrature = QuadratureTolerance::absolute(abs);
        self
    }

    pub fn params(&self) -> &StripParams<F> {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn bounds(&self, step: usize) -> (F, F) {
        strip_bounds(step, self.steps, &self.params)
    }

    pub fn inside(&self, state: &DiffState<F>) -> bool {
        let (l, u) = self.bounds(state.step);
        state.x > l && state.x < u
    }

    /// `C(y) = ∫_strip π(u) P_Δ(u, y) du` over the corridor one step earlier.
    pub fn proposal_normalizer(&self, y: &DiffState<F>) -> Result<F> {
        if y.step == 0 {
            return Err(Error::InvalidParams("no predecessor before time 0".into()));
        }
        let delta = self.params.delta;
        let (l, u) = self.bounds(y.step - 1);
        // Beyond 20 standard deviations the Gaussian factor is below e^{-200}.
        let spread = F::lit(20.0) * delta.sqrt();
        let a = l.max(invert_drift_map(y.x - spread, delta)?);
        let b = u.min(invert_drift_map(y.x + spread, delta)?);
        if !(a < b) {
            return Ok(F::zero());
        }
        let q = integrate(
            |v: F| (ln_stationary_density(v) + gaussian_ln_density(y.x - drift_map(v, delta), delta)).exp(),
            a,
            b,
            self.quadrature,
        )?;
        Ok(q.value.max(F::zero()))
    }

    /// Normalised proposal density of predecessor `x` given `y`.
    pub fn proposal_density_at(&self, y: &DiffState<F>, x: F) -> Result<F> {
        let (l, u) = self.bounds(y.step - 1);
        if !(x > l && x < u) {
            return Ok(F::zero());
        }
        let c = self.proposal_normalizer(y)?;
        if c == F::zero() {
            return Ok(F::zero());
        }
        Ok(stationary_density(x) * euler_forward_density(x, y.x, self.params.delta) / c)
    }

    /// Rejection sampler for the predecessor position.
    ///
    /// `v ~ N(y, Δ)` and `x = m⁻¹(v)` give `x` the density
    /// `φ_Δ(y − m(x)) m'(x)`; accepting with probability
    /// `(1−Δ)/m'(x) · e^{h − √(1+x²)}`, where `h` bounds `√(1+x²)` from below
    /// on the corridor, leaves `π(x) φ_Δ(y − m(x))` on the corridor.
    pub fn sample_predecessor<R: Rng + ?Sized>(&self, y: &DiffState<F>, rng: &mut R) -> Result<F> {
        self.sample_predecessor_counted(y, rng).map(|(x, _)| x)
    }

    /// As [`Self::sample_predecessor`], also returning the number of
    /// Gaussian draws used.
    pub fn sample_predecessor_counted<R: Rng + ?Sized>(&self, y: &DiffState<F>, rng: &mut R) -> Result<(F, usize)> {
        let delta = self.params.delta;
        let (l, u) = self.bounds(y.step - 1);
        let h_min = envelope_exponent(l, u);
        let sd = delta.sqrt();
        let bound = F::one() - delta;
        for attempt in 1..=self.max_attempts {
            let v = y.x + sd * F::sample_std_normal(rng);
            let x = invert_drift_map(v, delta)?;
            if !(x > l && x < u) {
                continue;
            }
            let accept = bound / drift_map_derivative(x, delta) * (h_min - (F::one() + x * x).sqrt()).exp();
            if F::sample_unit(rng) < accept {
                return Ok((x, attempt));
            }
        }
        Err(Error::SamplerExhausted {
            attempts: self.max_attempts,
            detail: format!("reverse proposal at step {} from x = {}", y.step, y.x.to_f64_lossy()),
        })
    }
}

impl<F: Real> ReverseModel<F> for HyperbolicModel<F> {
    type State = DiffState<F>;

    fn forward_density(&self, from: &DiffState<F>, to: &DiffState<F>) -> F {
        if to.step != from.step + 1 {
            return F::zero();
        }
        euler_forward_density(from.x, to.x, self.params.delta)
    }

    fn reverse_propose<R: Rng + ?Sized>(
        &self,
        current: &DiffState<F>,
        rng: &mut R,
    ) -> std::result::Result<ReverseStep<DiffState<F>, F>, ProposalError> {
        if current.step == 0 {
            return Err(Error::InvalidParams("reverse step requested at time 0".into()).into());
        }
        let c = self.proposal_normalizer(current)?;
        if c == F::zero() {
            return Err(ProposalError::EmptySupport);
        }
        let x = self.sample_predecessor(current, rng)?;
        // P(x, y) / [π(x) P(x, y) / C(y)] = C(y) / π(x)
        Ok(ReverseStep {
            state: DiffState::new(current.step - 1, x),
            log_increment: c.ln() - ln_stationary_density(x),
        })
    }

    fn proposal_density(&self, current: &DiffState<F>, predecessor: &DiffState<F>) -> std::result::Result<F, ProposalError> {
        if current.step == 0 || predecessor.step + 1 != current.step {
            return Ok(F::zero());
        }
        Ok(self.proposal_density_at(current, predecessor.x)?)
    }

    fn is_initial(&self, state: &DiffState<F>) -> bool {
        state.step == 0
    }

    fn is_target(&self, state: &DiffState<F>) -> bool {
        state.step > 0 && !self.inside(state)
    }

    fn initial_density(&self, state: &DiffState<F>) -> F {
        if state.step == 0 && self.inside(state) {
            stationary_density(state.x)
        } else {
            F::zero()
        }
    }

    /// Uniform on the terminal interval.
    fn terminal_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DiffState<F> {
        let (lt, ut) = (self.params.lt, self.params.ut);
        loop {
            let x = lt + (ut - lt) * F::sample_unit(rng);
            if x > lt && x < ut {
                return DiffState::new(self.steps, x);
            }
        }
    }

    fn terminal_density(&self, state: &DiffState<F>) -> F {
        if state.step == self.steps && self.inside(state) {
            F::one() / (self.params.ut - self.params.lt)
        } else {
            F::zero()
        }
    }

    fn level(&self, state: &DiffState<F>) -> usize {
        state.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate<F> {
    pub estimate: F,
    pub std_error: F,
    pub hits: usize,
}

/// Naive forward Monte Carlo of the same containment probability.
///
/// Paths start from `π` restricted to `(l₀, u₀)`; the hit fraction is scaled
/// by the `π`-mass of that interval so both methods estimate the same
/// unconditional quantity.
pub fn containment_oracle<F: Real, R: Rng + ?Sized>(p: &StripParams<F>, paths: usize, rng: &mut R) -> Result<OracleEstimate<F>> {
    let steps = p.steps()?;
    if paths == 0 {
        return Err(Error::InvalidConfig("path count must be positive".into()));
    }
    let mass = stationary_mass(p.l0, p.u0)?;
    let mut hits = 0usize;
    for _ in 0..paths {
        let mut x = sample_truncated_stationary(p.l0, p.u0, rng)?;
        let mut contained = true;
        for s in 1..=steps {
            x = euler_step(x, p.delta, rng);
            let (l, u) = strip_bounds(s, steps, p);
            if !(x > l && x < u) {
                contained = false;
                break;
            }
        }
        hits += usize::from(contained);
    }
    if hits == 0 {
        return Err(Error::Numerical("no contained path; geometry too rare for the forward oracle".into()));
    }
    let frac = F::from_count(hits) / F::from_count(paths);
    let se = (frac * (F::one() - frac) / F::from_count(paths)).sqrt();
    Ok(OracleEstimate {
        estimate: mass * frac,
        std_error: mass * se,
        hits,
    })
}
