//! Adaptive multilevel splitting, the forwards-in-time baseline.
//!
//! Particles are whole forward paths scored by a reaction coordinate `Ψ`.
//! Each iteration kills every particle whose score is at most the
//! `kill_count`-th smallest one, replaces them by clones of survivors and
//! moves the clones with an MCMC kernel targeting the path law conditioned
//! on `Ψ` exceeding that level. Killing all tied particles keeps the
//! estimator unbiased for discrete scores.

pub mod atm;
pub mod diffusion;

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{Event, EventSink};
use crate::scalar::Real;

pub use atm::{psi_atm, AtmSplitting};
pub use diffusion::{psi_diffusion, run_diffusion_ams, DiffusionSplitting, DiffusionSplittingSummary};

/// How the path kernels treat proposals that survive the level check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    /// Metropolis–Hastings correction, so the conditioned path law is
    /// exactly invariant.
    #[default]
    Corrected,
    /// Accept every admissible proposal, as in the kernel's original
    /// description. Only approximately invariant.
    Verbatim,
}

/// A rare-event problem as seen by the splitting algorithm.
pub trait SplittingProblem<F: Real> {
    type Path: Clone;

    /// Draws a path from the unconditional dynamics.
    fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::Path>;

    /// Reaction coordinate `Ψ`.
    fn psi(&self, path: &Self::Path) -> F;

    /// Paths with `Ψ ≥ target_level` have reached the rare set.
    fn target_level(&self) -> F;

    /// Weight in `[0, 1]` a path at the target level contributes, e.g. the
    /// indicator of a particular terminal state.
    fn success(&self, path: &Self::Path) -> F;

    /// One kernel move leaving the law conditioned on `Ψ > level` invariant.
    /// Rejected proposals return a copy of the input.
    fn mcmc_step<R: Rng + ?Sized>(&self, path: &Self::Path, level: F, rng: &mut R) -> Result<Self::Path>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingConfig {
    pub particles: usize,
    /// Minimum number of particles killed per iteration.
    pub kill_count: usize,
    /// Iterations before the run is abandoned as stagnant.
    pub max_iterations: usize,
    /// Kernel moves applied to each clone.
    pub mcmc_steps: usize,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        Self {
            particles: 1000,
            kill_count: 1,
            max_iterations: 1_000_000,
            mcmc_steps: 1,
        }
    }
}

impl SplittingConfig {
    pub fn with_particles(particles: usize) -> Self {
        Self {
            particles,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kill_count == 0 || self.kill_count >= self.particles {
            return Err(Error::InvalidConfig(format!(
                "kill_count must satisfy 1 <= kill_count < particles, got {} with {} particles",
                self.kill_count, self.particles
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingSummary<F> {
    pub estimate: F,
    /// Asymptotic approximation `p·√((−ln p_L + (1−q)/q) / N)` where `p_L`
    /// is the level product and `q` the final success fraction.
    pub std_error: F,
    pub iterations: usize,
    /// Kill level of each iteration; strictly increasing.
    pub levels: Vec<F>,
    /// `∏ (1 − killed/N)` over iterations.
    pub level_product: F,
    pub success_fraction: F,
    /// True if every particle was killed at some iteration.
    pub extinct: bool,
    pub elapsed_seconds: f64,
}

/// Adaptive multilevel splitting with tie-aware killing.
pub fn run_ams<F: Real, P: SplittingProblem<F>, R: Rng + ?Sized>(
    problem: &P,
    config: &SplittingConfig,
    rng: &mut R,
    sink: &dyn EventSink,
) -> Result<SplittingSummary<F>> {
    config.validate()?;
    let start = Instant::now();
    let n = config.particles;
    let target = problem.target_level();
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        paths.push(problem.sample_path(rng)?);
    }
    let mut scores: Vec<F> = paths.iter().map(|p| problem.psi(p)).collect();
    let mut levels = Vec::new();
    let mut product = F::one();
    let mut extinct = false;
    loop {
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite reaction coordinate"));
        let level = sorted[config.kill_count - 1];
        if level >= target {
            break;
        }
        if levels.len() >= config.max_iterations {
            return Err(Error::Stagnation {
                iterations: levels.len(),
                level: level.to_f64_lossy(),
            });
        }
        let killed: Vec<usize> = (0..n).filter(|&i| scores[i] <= level).collect();
        let survivors: Vec<usize> = (0..n).filter(|&i| scores[i] > level).collect();
        levels.push(level);
        sink.record(Event::SplittingIteration {
            iteration: levels.len(),
            level: level.to_f64_lossy(),
            killed: killed.len(),
        });
        if survivors.is_empty() {
            extinct = true;
            product = F::zero();
            break;
        }
        product = product * (F::one() - F::from_count(killed.len()) / F::from_count(n));
        for &i in &killed {
            let mut path = paths[survivors[rng.random_range(0..survivors.len())]].clone();
            for _ in 0..config.mcmc_steps {
                path = problem.mcmc_step(&path, level, rng)?;
            }
            scores[i] = problem.psi(&path);
            debug_assert!(scores[i] > level);
            paths[i] = path;
        }
    }
    let success_fraction = if extinct {
        F::zero()
    } else {
        paths
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| s >= target)
            .map(|(p, _)| problem.success(p))
            .sum::<F>()
            / F::from_count(n)
    };
    let estimate = product * success_fraction;
    let std_error = if estimate > F::zero() {
        let nf = F::from_count(n);
        let q = success_fraction;
        estimate * ((-product.ln() + (F::one() - q) / q) / nf).sqrt()
    } else {
        F::zero()
    };
    Ok(SplittingSummary {
        estimate,
        std_error,
        iterations: levels.len(),
        levels,
        level_product: product,
        success_fraction,
        extinct,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{CollectingSink, NullSink};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Ψ is the number of heads before the first tail in at most `n` fair
    /// flips; the target is `n` heads, of probability `2⁻ⁿ`.
    struct Coins {
        n: usize,
    }

    impl SplittingProblem<f64> for Coins {
        type Path = Vec<bool>;

        fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<bool>> {
            let mut p = Vec::new();
            while p.len() < self.n {
                let head = rng.random::<bool>();
                p.push(head);
                if !head {
                    break;
                }
            }
            Ok(p)
        }

        fn psi(&self, path: &Vec<bool>) -> f64 {
            path.iter().take_while(|&&h| h).count() as f64
        }

        fn target_level(&self) -> f64 {
            self.n as f64
        }

        fn success(&self, _path: &Vec<bool>) -> f64 {
            1.0
        }

        /// Exact conditional resampling: keep the first `level + 1` heads
        /// and redraw the rest.
        fn mcmc_step<R: Rng + ?Sized>(&self, _path: &Vec<bool>, level: f64, rng: &mut R) -> Result<Vec<bool>> {
            let keep = level as usize + 1;
            let mut p = vec![true; keep];
            while p.len() < self.n && *p.last().unwrap() {
                p.push(rng.random::<bool>());
            }
            Ok(p)
        }
    }

    #[test]
    fn certain_event_needs_no_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = run_ams(&Coins { n: 0 }, &SplittingConfig::with_particles(50), &mut rng, &NullSink).unwrap();
        assert_eq!(s.estimate, 1.0);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn coin_runs_are_unbiased_and_levels_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let problem = Coins { n: 8 };
        let reps = 400;
        let mut ests = Vec::new();
        for _ in 0..reps {
            let sink = CollectingSink::default();
            let s = run_ams(&problem, &SplittingConfig::with_particles(20), &mut rng, &sink).unwrap();
            assert!(s.estimate <= 1.0);
            assert!(s.levels.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(sink.events().len(), s.iterations);
            ests.push(s.estimate);
        }
        let m = ests.iter().sum::<f64>() / reps as f64;
        let sd = (ests.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let exact = 2f64.powi(-8);
        assert!((m - exact).abs() < 3.0 * sd / (reps as f64).sqrt(), "{m} vs {exact}");
    }

    #[test]
    fn stagnation_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SplittingConfig {
            max_iterations: 2,
            ..SplittingConfig::with_particles(10)
        };
        let err = run_ams(&Coins { n: 30 }, &cfg, &mut rng, &NullSink).unwrap_err();
        assert!(matches!(err, Error::Stagnation { iterations: 2, .. }));
    }

    #[test]
    fn config_validation() {
        assert!(SplittingConfig { kill_count: 0, ..SplittingConfig::default() }.validate().is_err());
        assert!(SplittingConfig { kill_count: 1000, ..SplittingConfig::default() }.validate().is_err());
        assert!(SplittingConfig::default().validate().is_ok());
    }
}
