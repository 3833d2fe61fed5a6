//! Splitting formulation of the ATM hitting problem.
//!
//! `Ψ` is the largest queue length along the path. The kernel picks a time
//! `t ≥ 1`, replaces the step into `X_t` by one of the four elementary moves
//! chosen uniformly, re-applies the remaining step directions, truncates at
//! the first return to an empty queue or arrival at the barrier, and fills
//! in unfinished paths from the forward dynamics.

use rand::Rng;

use super::{KernelMode, SplittingProblem};
use crate::error::Result;
use crate::models::atm::{forward_jump_prob, move_rate, mu_atm, AtmMove, AtmParams, AtmState};
use crate::scalar::Real;

/// Largest queue length along the path.
pub fn psi_atm(path: &[AtmState]) -> usize {
    path.iter().map(|x| x.queue).max().unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct AtmSplitting<F> {
    params: AtmParams<F>,
    /// Count only paths that reach the barrier with this many sources on;
    /// `None` counts every barrier hit.
    terminal_on: Option<usize>,
    mode: KernelMode,
    mu_cdf: Vec<F>,
}

impl<F: Real> AtmSplitting<F> {
    pub fn new(params: AtmParams<F>, terminal_on: Option<usize>, mode: KernelMode) -> Result<Self> {
        params.validate()?;
        let mut acc = F::zero();
        let mu_cdf = (0..=params.sources)
            .map(|j| {
                acc = acc + mu_atm(j, &params);
                acc
            })
            .collect();
        Ok(Self {
            params,
            terminal_on,
            mode,
            mu_cdf,
        })
    }

    pub fn params(&self) -> &AtmParams<F> {
        &self.params
    }

    /// Paths stop at the first time `n ≥ 1` the queue is empty or full.
    fn stops(&self, x: AtmState, index: usize) -> bool {
        index >= 1 && (x.queue == 0 || x.queue >= self.params.barrier)
    }

    fn admissible(&self, x: AtmState) -> bool {
        x.on <= self.params.sources
    }

    fn forward_step<R: Rng + ?Sized>(&self, x: AtmState, rng: &mut R) -> AtmState {
        let rates = AtmMove::ALL.map(|m| move_rate(x, m, &self.params));
        let total: F = rates.iter().copied().sum();
        let u = F::sample_unit(rng) * total;
        let mut acc = F::zero();
        for (m, r) in AtmMove::ALL.into_iter().zip(rates) {
            acc = acc + r;
            if u < acc {
                return m.apply(x).expect("positive-rate move is valid");
            }
        }
        let (m, _) = AtmMove::ALL
            .into_iter()
            .zip(rates)
            .rev()
            .find(|(_, r)| *r > F::zero())
            .expect("non-barrier states have a positive rate");
        m.apply(x).expect("positive-rate move is valid")
    }

    fn complete<R: Rng + ?Sized>(&self, path: &mut Vec<AtmState>, rng: &mut R) {
        while !self.stops(*path.last().expect("non-empty path"), path.len() - 1) {
            let next = self.forward_step(*path.last().expect("non-empty path"), rng);
            path.push(next);
        }
    }
}

impl<F: Real> SplittingProblem<F> for AtmSplitting<F> {
    type Path = Vec<AtmState>;

    fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<AtmState>> {
        let u = F::sample_unit(rng) * *self.mu_cdf.last().expect("K ≥ 0");
        let j = self.mu_cdf.partition_point(|&c| c <= u).min(self.params.sources);
        let mut path = vec![AtmState::new(0, j)];
        self.complete(&mut path, rng);
        Ok(path)
    }

    fn psi(&self, path: &Vec<AtmState>) -> F {
        F::from_count(psi_atm(path))
    }

    fn target_level(&self) -> F {
        F::from_count(self.params.barrier)
    }

    fn success(&self, path: &Vec<AtmState>) -> F {
        let last = path.last().expect("non-empty path");
        let hit = last.queue >= self.params.barrier && self.terminal_on.is_none_or(|k| last.on == k);
        if hit {
            F::one()
        } else {
            F::zero()
        }
    }

    fn mcmc_step<R: Rng + ?Sized>(&self, path: &Vec<AtmState>, level: F, rng: &mut R) -> Result<Vec<AtmState>> {
        let tau = path.len() - 1;
        let t = rng.random_range(1..=tau);
        let step = AtmMove::ALL[rng.random_range(0..4)];
        let Some(first) = step.apply(path[t - 1]).filter(|&x| self.admissible(x)) else {
            return Ok(path.clone());
        };
        let mut proposal = path[..t].to_vec();
        proposal.push(first);
        if !self.stops(first, t) {
            for s in t + 1..=tau {
                let dir = AtmMove::between(path[s - 1], path[s]).expect("paths move by elementary steps");
                let Some(next) = dir.apply(proposal[s - 1]).filter(|&x| self.admissible(x)) else {
                    return Ok(path.clone());
                };
                proposal.push(next);
                if self.stops(next, s) {
                    break;
                }
            }
        }
        let reattached = proposal.len() - 1;
        self.complete(&mut proposal, rng);
        let tau_new = proposal.len() - 1;

        // Ratio of path probabilities over the re-attached stretch; refilled
        // steps cancel against the reverse move's refill.
        let overlap = reattached.min(tau);
        let mut log_ratio = F::zero();
        for s in t..=overlap {
            let new = forward_jump_prob(proposal[s - 1], proposal[s], &self.params);
            if new == F::zero() {
                return Ok(path.clone());
            }
            log_ratio = log_ratio + new.ln() - forward_jump_prob(path[s - 1], path[s], &self.params).ln();
        }
        if self.psi(&proposal) <= level {
            return Ok(path.clone());
        }
        if self.mode == KernelMode::Verbatim {
            return Ok(proposal);
        }
        log_ratio = log_ratio + (F::from_count(tau) / F::from_count(tau_new)).ln();
        if log_ratio >= F::zero() || F::sample_unit(rng).ln() < log_ratio {
            Ok(proposal)
        } else {
            Ok(path.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::NullSink;
    use crate::models::atm::exact_hitting_oracle;
    use crate::splitting::{run_ams, SplittingConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn toy() -> AtmParams<f64> {
        AtmParams::new(1, 3, 1.0, 1.5, 0.5, 0.7).unwrap()
    }

    #[test]
    fn psi_examples() {
        let s = AtmState::new;
        assert_eq!(psi_atm(&[s(0, 1), s(0, 0)]), 0);
        assert_eq!(psi_atm(&[s(0, 1), s(1, 1), s(2, 1), s(1, 1)]), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let problem = AtmSplitting::new(toy(), None, KernelMode::Corrected).unwrap();
        for _ in 0..200 {
            let p = problem.sample_path(&mut rng).unwrap();
            // Running maximum: every prefix has Ψ no larger than the path.
            for k in 1..=p.len() {
                assert!(psi_atm(&p[..k]) <= psi_atm(&p));
            }
            assert!(psi_atm(&p) <= 3);
        }
    }

    #[test]
    fn kernel_respects_level_and_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let problem = AtmSplitting::new(toy(), None, KernelMode::Verbatim).unwrap();
        let mut path = loop {
            let p = problem.sample_path(&mut rng).unwrap();
            if psi_atm(&p) >= 2 {
                break p;
            }
        };
        for _ in 0..5000 {
            path = problem.mcmc_step(&path, 1.0, &mut rng).unwrap();
            assert!(psi_atm(&path) >= 2);
            assert!(path.iter().all(|x| x.on <= 1));
            for w in path.windows(2) {
                assert!(forward_jump_prob(w[0], w[1], problem.params()) > 0.0);
            }
        }
    }

    /// Exact law of `(terminal state, length)` for paths with `Ψ ≥ 1` by
    /// propagating the sub-stochastic occupation measure; the neglected tail
    /// beyond 200 steps is far below the test resolution.
    fn exact_classes(p: &AtmParams<f64>) -> HashMap<(AtmState, usize), f64> {
        let bucket = |n: usize| n.min(9);
        let mut out = HashMap::new();
        let x1 = AtmState::new(1, 1);
        let mut occ: HashMap<AtmState, f64> = HashMap::from([(x1, 1.0)]);
        for n in 1..200 {
            let mut next: HashMap<AtmState, f64> = HashMap::new();
            for (&x, &w) in &occ {
                for m in AtmMove::ALL {
                    let Some(y) = m.apply(x) else { continue };
                    let pr = forward_jump_prob(x, y, p);
                    if pr == 0.0 {
                        continue;
                    }
                    if y.queue == 0 || y.queue >= p.barrier {
                        *out.entry((y, bucket(n + 1))).or_default() += w * pr;
                    } else {
                        *next.entry(y).or_default() += w * pr;
                    }
                }
            }
            occ = next;
        }
        let total: f64 = out.values().sum();
        out.values_mut().for_each(|v| *v /= total);
        out
    }

    #[test]
    fn corrected_kernel_preserves_the_conditioned_path_law() {
        let params = toy();
        let exact = exact_classes(&params);
        let problem = AtmSplitting::new(params, None, KernelMode::Corrected).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut path = loop {
            let p = problem.sample_path(&mut rng).unwrap();
            if psi_atm(&p) >= 1 {
                break p;
            }
        };
        let (batches, per_batch) = (200, 2000);
        let mut batch_freqs: Vec<HashMap<(AtmState, usize), f64>> = Vec::new();
        for _ in 0..batches {
            let mut f: HashMap<(AtmState, usize), f64> = HashMap::new();
            for _ in 0..per_batch {
                path = problem.mcmc_step(&path, 0.0, &mut rng).unwrap();
                let key = (*path.last().unwrap(), (path.len() - 1).min(9));
                *f.entry(key).or_default() += 1.0 / per_batch as f64;
            }
            batch_freqs.push(f);
        }
        let mut checked = 0;
        for (key, &p) in &exact {
            if p < 0.02 {
                continue;
            }
            let vals: Vec<f64> = batch_freqs.iter().map(|f| f.get(key).copied().unwrap_or(0.0)).collect();
            let m = vals.iter().sum::<f64>() / batches as f64;
            let se = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64 / batches as f64).sqrt();
            // 3 SE, Bonferroni-relaxed to 4 for the handful of classes.
            assert!((m - p).abs() < 4.0 * se, "{key:?}: {m} ± {se} vs {p}");
            checked += 1;
        }
        assert!(checked >= 5);
    }

    #[test]
    fn ams_matches_oracle_on_small_instance() {
        let params = AtmParams::new(3, 4, 0.5, 10.0, 1.0, 3.0).unwrap();
        let k = 2;
        let exact = exact_hitting_oracle(&params, k).unwrap();
        let problem = AtmSplitting::new(params, Some(k), KernelMode::Corrected).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 40;
        let mut ests = Vec::new();
        for _ in 0..reps {
            let s = run_ams(&problem, &SplittingConfig::with_particles(200), &mut rng, &NullSink).unwrap();
            assert!(s.estimate <= 1.0);
            ests.push(s.estimate);
        }
        let m = ests.iter().sum::<f64>() / reps as f64;
        let se = (ests.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64).sqrt();
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se} vs {exact}");
    }
}
