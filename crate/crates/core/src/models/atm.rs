//! Fluid-source ATM multiplexer: `K` on/off sources feeding one FIFO queue.
//!
//! The state `(i, j)` holds the queue length and the number of sources that
//! are on. Forward paths leave the empty-queue set and are stopped the first
//! time the queue either empties again or hits the barrier `b`. Reverse
//! proposals use the approximate conditionals
//! `π̂ᵢ(i | j) ∝ (λ max{j,1} / μ)^i` and
//! `π̂ⱼ(j | i) ∝ Bin(j; K, α₀/(α₀+α₁)) · π̂ᵢ(i | j)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, ProposalError, Result};
use crate::scalar::Real;
use crate::smc::{ReverseModel, ReverseStep};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmParams<F> {
    /// Number of sources `K`.
    pub sources: usize,
    /// Overflow barrier `b`.
    pub barrier: usize,
    /// Packet rate of one active source.
    pub lambda: F,
    /// Service rate.
    pub mu: F,
    /// Off → on rate.
    pub alpha0: F,
    /// On → off rate.
    pub alpha1: F,
}

impl<F: Real> AtmParams<F> {
    pub fn new(sources: usize, barrier: usize, lambda: F, mu: F, alpha0: F, alpha1: F) -> Result<Self> {
        let p = Self {
            sources,
            barrier,
            lambda,
            mu,
            alpha0,
            alpha1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources < 1 {
            return Err(Error::InvalidParams("sources (K) must be at least 1".into()));
        }
        if self.barrier < 1 {
            return Err(Error::InvalidParams("barrier (b) must be at least 1".into()));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
        ] {
            if !(v > F::zero() && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    /// Stationary probability that a single source is on.
    pub fn on_fraction(&self) -> F {
        self.alpha0 / (self.alpha0 + self.alpha1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtmState {
    /// Queue length `i`.
    pub queue: usize,
    /// Active sources `j`.
    pub on: usize,
}

impl AtmState {
    pub const fn new(queue: usize, on: usize) -> Self {
        Self { queue, on }
    }
}

/// The four elementary moves of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtmMove {
    Arrival,
    Service,
    SourceOn,
    SourceOff,
}

impl AtmMove {
    pub const ALL: [AtmMove; 4] = [AtmMove::Arrival, AtmMove::Service, AtmMove::SourceOn, AtmMove::SourceOff];

    /// Applies the move without range checks; `None` if a coordinate would
    /// become negative.
    pub fn apply(self, x: AtmState) -> Option<AtmState> {
        Some(match self {
            AtmMove::Arrival => AtmState::new(x.queue + 1, x.on),
            AtmMove::Service => AtmState::new(x.queue.checked_sub(1)?, x.on),
            AtmMove::SourceOn => AtmState::new(x.queue, x.on + 1),
            AtmMove::SourceOff => AtmState::new(x.queue, x.on.checked_sub(1)?),
        })
    }

    /// The move taking `x` to `y`, if they are adjacent.
    pub fn between(x: AtmState, y: AtmState) -> Option<AtmMove> {
        AtmMove::ALL.into_iter().find(|m| m.apply(x) == Some(y))
    }
}

/// Rate of `m` out of `x`; zero where the move is impossible.
pub fn move_rate<F: Real>(x: AtmState, m: AtmMove, p: &AtmParams<F>) -> F {
    if x.queue >= p.barrier || x.on > p.sources {
        return F::zero();
    }
    match m {
        AtmMove::Arrival => p.lambda * F::from_count(x.on),
        AtmMove::Service if x.queue > 0 => p.mu,
        AtmMove::Service => F::zero(),
        AtmMove::SourceOn => p.alpha0 * F::from_count(p.sources - x.on),
        AtmMove::SourceOff => p.alpha1 * F::from_count(x.on),
    }
}

/// Total jump rate out of `x`; zero on the barrier, which is absorbing.
pub fn total_rate<F: Real>(x: AtmState, p: &AtmParams<F>) -> F {
    AtmMove::ALL.into_iter().map(|m| move_rate(x, m, p)).sum()
}

/// Embedded jump-chain probability `P(x, y)`.
pub fn forward_jump_prob<F: Real>(x: AtmState, y: AtmState, p: &AtmParams<F>) -> F {
    let Some(m) = AtmMove::between(x, y) else {
        return F::zero();
    };
    let r = move_rate(x, m, p);
    if r == F::zero() {
        return F::zero();
    }
    r / total_rate(x, p)
}

fn ln_binomial<F: Real>(n: usize, k: usize) -> F {
    (0..k).fold(F::zero(), |acc, i| {
        acc + (F::from_count(n - i) / F::from_count(i + 1)).ln()
    })
}

/// Binomial entrance law `μ((0, j))`.
pub fn mu_atm<F: Real>(j: usize, p: &AtmParams<F>) -> F {
    if j > p.sources {
        return F::zero();
    }
    let q = p.on_fraction();
    (ln_binomial::<F>(p.sources, j) + F::from_count(j) * q.ln() + F::from_count(p.sources - j) * (F::one() - q).ln())
        .exp()
}

/// `π̂ᵢ(i | j)`, normalised over `i ∈ 0..=b`.
pub fn csd_i<F: Real>(i: usize, j: usize, p: &AtmParams<F>) -> F {
    if i > p.barrier {
        return F::zero();
    }
    let rho = p.lambda * F::from_count(j.max(1)) / p.mu;
    // Normalise relative to the largest term so ρ^b never overflows.
    let top = if rho > F::one() { p.barrier } else { 0 };
    let ln_rho = rho.ln();
    let z: F = (0..=p.barrier)
        .map(|k| ((F::from_count(k) - F::from_count(top)) * ln_rho).exp())
        .sum();
    ((F::from_count(i) - F::from_count(top)) * ln_rho).exp() / z
}

/// `π̂ⱼ(j | i)`, normalised over `j ∈ 0..=K`.
pub fn csd_j<F: Real>(j: usize, i: usize, p: &AtmParams<F>) -> F {
    if j > p.sources {
        return F::zero();
    }
    let un = |jj: usize| mu_atm(jj, p) * csd_i(i, jj, p);
    let z: F = (0..=p.sources).map(un).sum();
    un(j) / z
}

/// Reverse-time model for the probability of hitting `(b, k)` before the
/// queue empties, starting from the binomial law on `{(0, j)}`.
#[derive(Debug, Clone)]
pub struct AtmModel<F> {
    params: AtmParams<F>,
    terminal_on: usize,
    // csd_i_table[j][i], csd_j_table[i][j], mu_table[j]
    csd_i_table: Vec<Vec<F>>,
    csd_j_table: Vec<Vec<F>>,
    mu_table: Vec<F>,
}

/// A candidate predecessor with its normalised proposal probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<S, F> {
    pub state: S,
    pub probability: F,
    pub forward: F,
}

/// Normalised proposal and its normaliser `C(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSupport<S, F> {
    pub candidates: Vec<Candidate<S, F>>,
    pub normalizer: F,
}

impl<F: Real> AtmModel<F> {
    pub fn new(params: AtmParams<F>, terminal_on: usize) -> Result<Self> {
        params.validate()?;
        if terminal_on > params.sources {
            return Err(Error::InvalidParams(format!(
                "terminal on-count {terminal_on} exceeds K = {}",
                params.sources
            )));
        }
        let csd_i_table = (0..=params.sources)
            .map(|j| (0..=params.barrier).map(|i| csd_i(i, j, &params)).collect())
            .collect();
        let csd_j_table = (0..=params.barrier)
            .map(|i| (0..=params.sources).map(|j| csd_j(j, i, &params)).collect())
            .collect();
        let mu_table = (0..=params.sources).map(|j| mu_atm(j, &params)).collect();
        Ok(Self {
            params,
            terminal_on,
            csd_i_table,
            csd_j_table,
            mu_table,
        })
    }

    pub fn params(&self) -> &AtmParams<F> {
        &self.params
    }

    pub fn terminal_state(&self) -> AtmState {
        AtmState::new(self.params.barrier, self.terminal_on)
    }

    /// Ratio `π̂(changed coords of x | rest) / π̂(changed coords of y | rest)`.
    fn csd_ratio(&self, x: AtmState, y: AtmState) -> F {
        if x.on == y.on {
            let row = &self.csd_i_table[y.on];
            row[x.queue] / row[y.queue]
        } else {
            let row = &self.csd_j_table[y.queue];
            row[x.on] / row[y.on]
        }
    }

    /// Every admissible predecessor of `y` with its proposal probability.
    pub fn proposal_support(&self, y: AtmState) -> std::result::Result<ProposalSupport<AtmState, F>, ProposalError> {
        let p = &self.params;
        if y.queue == 0 || y.queue > p.barrier || y.on > p.sources {
            return Err(Error::InvalidParams(format!("no reverse step from {y:?}")).into());
        }
        let mut candidates = Vec::with_capacity(4);
        let mut total = F::zero();
        let preds = [
            y.queue.checked_sub(1).map(|q| AtmState::new(q, y.on)),
            Some(AtmState::new(y.queue + 1, y.on)),
            y.on.checked_sub(1).map(|o| AtmState::new(y.queue, o)),
            Some(AtmState::new(y.queue, y.on + 1)),
        ];
        for x in preds.into_iter().flatten() {
            if x.queue >= p.barrier || x.on > p.sources {
                continue;
            }
            let fwd = forward_jump_prob(x, y, p);
            if fwd == F::zero() {
                continue;
            }
            let w = self.csd_ratio(x, y) * fwd;
            total = total + w;
            candidates.push(Candidate {
                state: x,
                probability: w,
                forward: fwd,
            });
        }
        if candidates.is_empty() {
            return Err(ProposalError::EmptySupport);
        }
        for c in candidates.iter_mut() {
            c.probability = c.probability / total;
        }
        Ok(ProposalSupport {
            candidates,
            normalizer: total,
        })
    }
}

pub(crate) fn pick<S: Copy, F: Real, R: Rng + ?Sized>(candidates: &[Candidate<S, F>], rng: &mut R) -> usize {
    let u = F::sample_unit(rng);
    let mut acc = F::zero();
    for (k, c) in candidates.iter().enumerate() {
        acc = acc + c.probability;
        if u < acc {
            return k;
        }
    }
    // Rounding can leave the cumulative sum just short of one.
    candidates
        .iter()
        .rposition(|c| c.probability > F::zero())
        .unwrap_or(candidates.len() - 1)
}

impl<F: Real> ReverseModel<F> for AtmModel<F> {
    type State = AtmState;

    fn forward_density(&self, from: &AtmState, to: &AtmState) -> F {
        forward_jump_prob(*from, *to, &self.params)
    }

    fn reverse_propose<R: Rng + ?Sized>(
        &self,
        current: &AtmState,
        rng: &mut R,
    ) -> std::result::Result<ReverseStep<AtmState, F>, ProposalError> {
        let support = self.proposal_support(*current)?;
        let c = support.candidates[pick(&support.candidates, rng)];
        Ok(ReverseStep {
            state: c.state,
            log_increment: c.forward.ln() - c.probability.ln(),
        })
    }

    fn proposal_density(&self, current: &AtmState, predecessor: &AtmState) -> std::result::Result<F, ProposalError> {
        let support = self.proposal_support(*current)?;
        Ok(support
            .candidates
            .iter()
            .find(|c| c.state == *predecessor)
            .map_or(F::zero(), |c| c.probability))
    }

    fn is_initial(&self, state: &AtmState) -> bool {
        state.queue == 0
    }

    /// Only the barrier is excluded from reverse proposals; the empty-queue
    /// states stop forward paths too but act as the initial set here.
    fn is_target(&self, state: &AtmState) -> bool {
        state.queue >= self.params.barrier
    }

    fn initial_density(&self, state: &AtmState) -> F {
        if state.queue == 0 && state.on <= self.params.sources {
            self.mu_table[state.on]
        } else {
            F::zero()
        }
    }

    fn terminal_sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> AtmState {
        self.terminal_state()
    }

    fn terminal_density(&self, state: &AtmState) -> F {
        if *state == self.terminal_state() {
            F::one()
        } else {
            F::zero()
        }
    }

    fn level(&self, state: &AtmState) -> usize {
        state.queue
    }
}

/// Exact `P_μ(X_τ = (b, k))` for every terminal on-count `k`, from the
/// first-step equations of the embedded chain.
///
/// Paths start at `(0, j) ~ μ`; the first step must be an arrival since any
/// other move keeps the queue empty and stops the path. The interior system
/// is block tridiagonal in the queue length and is solved blockwise.
pub fn exact_hitting_all(p: &AtmParams<f64>) -> Result<Vec<f64>> {
    p.validate()?;
    let (k_max, b) = (p.sources, p.barrier);
    if (b + 1) * (k_max + 1) > 10_000 {
        return Err(Error::InvalidParams("instance too large for the exact oracle".into()));
    }
    let width = k_max + 1;
    let entry = |j: usize| mu_atm(j, p) * forward_jump_prob(AtmState::new(0, j), AtmState::new(1, j), p);

    if b == 1 {
        return Ok((0..width).map(entry).collect());
    }

    // h_i (width × width): column k holds P_{(i,j)}(hit (b,k) first).
    let interior = b - 1;
    let prob = |x: AtmState, y: AtmState| forward_jump_prob(x, y, p);
    let diag = |i: usize| {
        DMatrix::from_fn(width, width, |r, c| {
            let same = if r == c { 1.0 } else { 0.0 };
            same - prob(AtmState::new(i, r), AtmState::new(i, c))
        })
    };
    let lower = |i: usize| DVector::from_fn(width, |r, _| -prob(AtmState::new(i, r), AtmState::new(i - 1, r)));
    let upper = |i: usize| DVector::from_fn(width, |r, _| -prob(AtmState::new(i, r), AtmState::new(i + 1, r)));

    // Forward elimination. Block rows are indexed by queue length 1..=b−1.
    let mut d_prime: Vec<DMatrix<f64>> = Vec::with_capacity(interior);
    let mut r_prime: Vec<DMatrix<f64>> = Vec::with_capacity(interior);
    for i in 1..=interior {
        let mut d = diag(i);
        let mut r = DMatrix::zeros(width, width);
        if i == interior {
            for j in 0..width {
                r[(j, j)] = prob(AtmState::new(i, j), AtmState::new(b, j));
            }
        }
        if i > 1 {
            let l = lower(i);
            let u_prev = upper(i - 1);
            let lu = d_prime[i - 2].clone().lu();
            // m = L_i · D'_{i−1}⁻¹ with L_i diagonal.
            let inv = lu
                .try_inverse()
                .ok_or_else(|| Error::SingularSystem(format!("block {i}")))?;
            let m = DMatrix::from_diagonal(&l) * inv;
            d -= &m * DMatrix::from_diagonal(&u_prev);
            r -= &m * &r_prime[i - 2];
        }
        d_prime.push(d);
        r_prime.push(r);
    }
    // Back substitution.
    let mut h: Vec<DMatrix<f64>> = vec![DMatrix::zeros(width, width); interior];
    for i in (1..=interior).rev() {
        let mut rhs = r_prime[i - 1].clone();
        if i < interior {
            rhs -= DMatrix::from_diagonal(&upper(i)) * &h[i];
        }
        h[i - 1] = d_prime[i - 1]
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem(format!("block {i}")))?;
    }
    Ok((0..width)
        .map(|k| (0..width).map(|j| entry(j) * h[0][(j, k)]).sum())
        .collect())
}

/// Exact hitting probability of `(b, k)`; see [`exact_hitting_all`].
pub fn exact_hitting_oracle(p: &AtmParams<f64>, k: usize) -> Result<f64> {
    if k > p.sources {
        return Err(Error::InvalidParams(format!("k = {k} exceeds K = {}", p.sources)));
    }
    Ok(exact_hitting_all(p)?[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::{run_reverse_smc, EngineConfig};
    use crate::events::NullSink;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> AtmParams<f64> {
        AtmParams::new(20, 10, 0.5, 10.0, 1.0, 3.0).unwrap()
    }

    fn small() -> AtmParams<f64> {
        AtmParams::new(3, 4, 0.5, 10.0, 1.0, 3.0).unwrap()
    }

    #[test]
    fn only_move_from_empty_idle_system_is_source_on() {
        let p = fig1();
        assert_eq!(forward_jump_prob(AtmState::new(0, 0), AtmState::new(0, 1), &p), 1.0);
        assert_eq!(forward_jump_prob(AtmState::new(0, 0), AtmState::new(1, 0), &p), 0.0);
    }

    #[test]
    fn hand_summed_rates() {
        // From (1,1): arrival 0.5, service 10, on 19, off 3; total 32.5.
        let p = fig1();
        let v = forward_jump_prob(AtmState::new(1, 1), AtmState::new(0, 1), &p);
        assert!((v - 10.0 / 32.5).abs() < 1e-15);
        assert!((total_rate(AtmState::new(1, 1), &p) - 32.5).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let p = fig1();
        for i in 0..p.barrier {
            for j in 0..=p.sources {
                let x = AtmState::new(i, j);
                let s: f64 = AtmMove::ALL
                    .into_iter()
                    .filter_map(|m| m.apply(x))
                    .map(|y| forward_jump_prob(x, y, &p))
                    .sum();
                assert!((s - 1.0).abs() < 1e-12, "{x:?}");
            }
        }
        assert_eq!(total_rate(AtmState::new(p.barrier, 3), &p), 0.0);
    }

    #[test]
    fn csd_i_examples() {
        let p = fig1();
        assert!((csd_i(1, 2, &p) / csd_i(0, 2, &p) - 0.1).abs() < 1e-14);
        assert!((csd_i(1, 0, &p) / csd_i(0, 0, &p) - 0.05).abs() < 1e-14);
        for j in 0..=p.sources {
            let s: f64 = (0..=p.barrier).map(|i| csd_i(i, j, &p)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csd_i_survives_large_rho() {
        let p = AtmParams::new(20, 200, 5.0, 1.0, 1.0, 3.0).unwrap();
        let s: f64 = (0..=p.barrier).map(|i| csd_i(i, 20, &p)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csd_j_hand_evaluation() {
        // K = 2, α0 = 1, α1 = 3, λ = μ = 1, b = 2, i = 1:
        // π̂ᵢ(1|j) = 1/3 for every j since ρ = max{j,1} ≥ 1 ... ρ = 1, 2, 2.
        // j=0: ρ=1 → 1/3; j=1: ρ=1 → 1/3; j=2: ρ=2 → 2/7.
        // Bin(2, 1/4): 9/16, 6/16, 1/16.
        let p = AtmParams::new(2, 2, 1.0, 1.0, 1.0, 3.0).unwrap();
        let un = [9.0 / 16.0 / 3.0, 6.0 / 16.0 / 3.0, 1.0 / 16.0 * 2.0 / 7.0];
        let z: f64 = un.iter().sum();
        for j in 0..3 {
            assert!((csd_j(j, 1, &p) - un[j] / z).abs() < 1e-12);
        }
        // i = 0: proportional to binomial × π̂ᵢ(0|j).
        let q = fig1();
        let r = csd_j(6, 0, &q) / csd_j(5, 0, &q);
        let expect = mu_atm(6, &q) * csd_i(0, 6, &q) / (mu_atm(5, &q) * csd_i(0, 5, &q));
        assert!((r - expect).abs() < 1e-12);
        for i in 0..=q.barrier {
            let s: f64 = (0..=q.sources).map(|j| csd_j(j, i, &q)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entrance_law() {
        let p = fig1();
        let pmf: Vec<f64> = (0..=20).map(|j| mu_atm(j, &p)).collect();
        let mode = (0..=20).max_by(|&a, &b| pmf[a].partial_cmp(&pmf[b]).unwrap()).unwrap();
        assert_eq!(mode, 5);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pmf[0] - 0.75_f64.powi(20)).abs() < 1e-15);
    }

    #[test]
    fn proposal_support_structure() {
        let p = fig1();
        let m = AtmModel::new(p, 5).unwrap();
        let s = m.proposal_support(AtmState::new(1, 3)).unwrap();
        assert!(s.candidates.iter().any(|c| c.state == AtmState::new(0, 3)));
        let s = m.proposal_support(AtmState::new(p.barrier - 1, 3)).unwrap();
        assert!(s.candidates.iter().all(|c| c.state.queue != p.barrier));
        // From the barrier only the arrival from below remains.
        let s = m.proposal_support(AtmState::new(p.barrier, 3)).unwrap();
        assert_eq!(s.candidates.len(), 1);
        assert_eq!(s.candidates[0].state, AtmState::new(p.barrier - 1, 3));
        assert_eq!(
            m.proposal_support(AtmState::new(p.barrier, 0)),
            Err(ProposalError::EmptySupport)
        );
    }

    #[test]
    fn proposal_normalisation_everywhere() {
        let p = fig1();
        let m = AtmModel::new(p, 5).unwrap();
        for i in 1..=p.barrier {
            for j in 0..=p.sources {
                let y = AtmState::new(i, j);
                let Ok(s) = m.proposal_support(y) else { continue };
                let total: f64 = s.candidates.iter().map(|c| c.probability).sum();
                assert!((total - 1.0).abs() < 1e-12);
                for c in &s.candidates {
                    assert!(forward_jump_prob(c.state, y, &p) > 0.0);
                    assert!(c.state.queue != p.barrier);
                }
            }
        }
    }

    /// Brute-force oracle: dense solve of the whole first-step system.
    fn dense_oracle(p: &AtmParams<f64>, k: usize) -> f64 {
        let w = p.sources + 1;
        let idx = |i: usize, j: usize| (i - 1) * w + j;
        let n = (p.barrier - 1) * w;
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 1..p.barrier {
            for j in 0..w {
                let x = AtmState::new(i, j);
                for m in AtmMove::ALL {
                    let Some(y) = m.apply(x) else { continue };
                    let pr = forward_jump_prob(x, y, p);
                    if pr == 0.0 {
                        continue;
                    }
                    if y.queue == p.barrier {
                        if y.on == k {
                            rhs[idx(i, j)] += pr;
                        }
                    } else if y.queue > 0 {
                        a[(idx(i, j), idx(y.queue, y.on))] -= pr;
                    }
                }
            }
        }
        let h = a.lu().solve(&rhs).unwrap();
        (0..w)
            .map(|j| mu_atm(j, p) * forward_jump_prob(AtmState::new(0, j), AtmState::new(1, j), p) * h[idx(1, j)])
            .sum()
    }

    #[test]
    fn block_oracle_matches_dense_solve() {
        for p in [small(), fig1(), AtmParams::new(4, 2, 1.0, 2.0, 0.7, 0.4).unwrap()] {
            let all = exact_hitting_all(&p).unwrap();
            for k in 0..=p.sources {
                let d = dense_oracle(&p, k);
                assert!((all[k] - d).abs() <= 1e-12 * d.max(1e-300) + 1e-300, "k={k}: {} vs {d}", all[k]);
            }
        }
    }

    #[test]
    fn barrier_one_is_one_step_enumeration() {
        let p = AtmParams::new(3, 1, 0.5, 10.0, 1.0, 3.0).unwrap();
        for k in 0..=3 {
            let direct = mu_atm(k, &p) * forward_jump_prob(AtmState::new(0, k), AtmState::new(1, k), &p);
            assert!((exact_hitting_oracle(&p, k).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn terminal_probabilities_form_a_subprobability() {
        let all = exact_hitting_all(&fig1()).unwrap();
        let s: f64 = all.iter().sum();
        assert!(s > 0.0 && s <= 1.0);
        assert_eq!(all[0], 0.0);
    }

    #[test]
    fn small_instance_frozen_values() {
        // Regression fixtures, computed once with an independent dense solve.
        let all = exact_hitting_all(&small()).unwrap();
        let frozen = [0.0, 4.521_439_416_245_609e-6, 8.483_908_368_841_676e-6, 2.897_873_585_833_296e-6];
        for k in 0..4 {
            assert!((all[k] - frozen[k]).abs() <= 1e-12 * frozen[k].max(1e-300), "k={k}: {:e}", all[k]);
        }
    }

    #[test]
    fn forward_monte_carlo_agrees_with_oracle_on_a_non_rare_instance() {
        let p = AtmParams::new(3, 2, 2.0, 1.0, 1.0, 1.0).unwrap();
        let exact = exact_hitting_all(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut hits = vec![0usize; 4];
        for _ in 0..n {
            // μ then embedded chain until queue 0 or b (t ≥ 1).
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut j = 3;
            for jj in 0..=3 {
                acc += mu_atm(jj, &p);
                if u < acc {
                    j = jj;
                    break;
                }
            }
            let mut x = AtmState::new(0, j);
            loop {
                let tot = total_rate(x, &p);
                let mut v = rng.random::<f64>() * tot;
                let mut next = x;
                for m in AtmMove::ALL {
                    let r = move_rate(x, m, &p);
                    if v < r {
                        next = m.apply(x).unwrap();
                        break;
                    }
                    v -= r;
                }
                x = next;
                if x.queue == 0 || x.queue == p.barrier {
                    break;
                }
            }
            if x.queue == p.barrier {
                hits[x.on] += 1;
            }
        }
        for k in 0..4 {
            let ph = hits[k] as f64 / n as f64;
            let se = (exact[k] * (1.0 - exact[k]) / n as f64).sqrt().max(1e-9);
            assert!((ph - exact[k]).abs() < 4.0 * se, "k={k}: {ph} vs {}", exact[k]);
        }
    }

    #[test]
    fn reverse_trajectories_reach_the_empty_queue() {
        let p = fig1();
        let m = AtmModel::new(p, 8).unwrap();
        let cfg = EngineConfig {
            particles: 10_000,
            ess_fraction: 0.0,
            step_cap: 1_000_000,
            ..EngineConfig::with_particles(10_000, 3)
        };
        let out = run_reverse_smc(&m, &cfg, &NullSink).unwrap();
        assert_eq!(out.ensemble.zeroed(), 0);
        for particle in &out.ensemble.particles {
            assert_eq!(particle.trajectory.last().queue, 0);
        }
    }
}
