//! Splitting formulation of the corridor-containment problem.
//!
//! A path starts at a fixed `x₀` and runs until it leaves the corridor or
//! reaches the horizon. `Ψ` counts the grid times the path stays inside,
//! so a fully contained path scores `n = t/Δ`. The kernel redraws one
//! position: uniformly across the corridor at times already guaranteed by
//! the level, otherwise from the Euler transition out of the previous
//! position.

use std::time::Instant;

use rand::Rng;

use super::{run_ams, KernelMode, SplittingConfig, SplittingProblem};
use crate::error::{Error, Result};
use crate::events::EventSink;
use crate::models::hyperbolic::{euler_step, ln_euler_forward_density, stationary_density, HyperbolicModel};
use crate::scalar::Real;

/// Number of grid times `s ≥ 1` before the first exit, at most `steps`.
pub fn psi_diffusion<F: Real>(path: &[F], model: &HyperbolicModel<F>) -> usize {
    let tau = path.len() - 1;
    let (l, u) = model.bounds(tau);
    let x = path[tau];
    if tau >= 1 && !(x > l && x < u) {
        tau - 1
    } else {
        tau
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionSplitting<'a, F> {
    model: &'a HyperbolicModel<F>,
    x0: F,
    mode: KernelMode,
}

impl<'a, F: Real> DiffusionSplitting<'a, F> {
    pub fn new(model: &'a HyperbolicModel<F>, x0: F, mode: KernelMode) -> Self {
        Self { model, x0, mode }
    }

    fn inside(&self, s: usize, x: F) -> bool {
        let (l, u) = self.model.bounds(s);
        x > l && x < u
    }

    fn complete<R: Rng + ?Sized>(&self, path: &mut Vec<F>, rng: &mut R) {
        let delta = self.model.params().delta;
        loop {
            let s = path.len() - 1;
            let x = path[s];
            if s == self.model.steps() || (s >= 1 && !self.inside(s, x)) {
                return;
            }
            path.push(euler_step(x, delta, rng));
        }
    }

    fn ln_p(&self, x: F, y: F) -> F {
        ln_euler_forward_density(x, y, self.model.params().delta)
    }
}

impl<F: Real> SplittingProblem<F> for DiffusionSplitting<'_, F> {
    type Path = Vec<F>;

    fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<F>> {
        let mut path = Vec::with_capacity(self.model.steps() + 1);
        path.push(self.x0);
        self.complete(&mut path, rng);
        Ok(path)
    }

    fn psi(&self, path: &Vec<F>) -> F {
        F::from_count(psi_diffusion(path, self.model))
    }

    fn target_level(&self) -> F {
        F::from_count(self.model.steps())
    }

    fn success(&self, _path: &Vec<F>) -> F {
        F::one()
    }

    fn mcmc_step<R: Rng + ?Sized>(&self, path: &Vec<F>, level: F, rng: &mut R) -> Result<Vec<F>> {
        let tau = path.len() - 1;
        let lvl = level.to_usize().unwrap_or(0);
        let s = rng.random_range(1..=tau);
        let uniform_branch = s <= lvl;
        let x_new = if uniform_branch {
            let (l, u) = self.model.bounds(s);
            l + (u - l) * F::sample_unit(rng)
        } else {
            euler_step(path[s - 1], self.model.params().delta, rng)
        };
        let mut proposal = path[..=s].to_vec();
        proposal[s] = x_new;
        if self.inside(s, x_new) {
            if s < tau {
                proposal.extend_from_slice(&path[s + 1..]);
            } else {
                self.complete(&mut proposal, rng);
            }
        }
        if self.psi(&proposal) <= level {
            return Ok(path.clone());
        }
        if self.mode == KernelMode::Verbatim {
            return Ok(proposal);
        }
        let tau_new = proposal.len() - 1;
        let mut log_ratio = (F::from_count(tau) / F::from_count(tau_new)).ln();
        if uniform_branch {
            log_ratio = log_ratio + self.ln_p(path[s - 1], x_new) - self.ln_p(path[s - 1], path[s]);
        }
        if s < tau && s < tau_new {
            log_ratio = log_ratio + self.ln_p(x_new, path[s + 1]) - self.ln_p(path[s], path[s + 1]);
        }
        if log_ratio >= F::zero() || F::sample_unit(rng).ln() < log_ratio {
            Ok(proposal)
        } else {
            Ok(path.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSplittingSummary<F> {
    pub estimate: F,
    /// Standard error across initial conditions.
    pub std_error: F,
    pub initial_conditions: usize,
    pub total_iterations: usize,
    pub elapsed_seconds: f64,
}

/// Containment probability from `π`-weighted uniform initial conditions,
/// with one splitting run per initial condition.
pub fn run_diffusion_ams<F: Real, R: Rng + ?Sized>(
    model: &HyperbolicModel<F>,
    initial_conditions: usize,
    config: &SplittingConfig,
    mode: KernelMode,
    rng: &mut R,
    sink: &dyn EventSink,
) -> Result<DiffusionSplittingSummary<F>> {
    if initial_conditions == 0 {
        return Err(Error::InvalidConfig("need at least one initial condition".into()));
    }
    let start = Instant::now();
    let p = model.params();
    let width = p.u0 - p.l0;
    let mut terms = Vec::with_capacity(initial_conditions);
    let mut iterations = 0;
    let mut single_se = F::zero();
    for _ in 0..initial_conditions {
        let x0 = p.l0 + width * F::sample_unit(rng);
        let run = run_ams(&DiffusionSplitting::new(model, x0, mode), config, rng, sink)?;
        iterations += run.iterations;
        let scale = width * stationary_density(x0);
        single_se = run.std_error * scale;
        terms.push(run.estimate * scale);
    }
    let m = F::from_count(initial_conditions);
    let estimate = terms.iter().copied().sum::<F>() / m;
    let std_error = if initial_conditions > 1 {
        let ss: F = terms.iter().map(|&t| (t - estimate) * (t - estimate)).sum();
        (ss / (m - F::one()) / m).sqrt()
    } else {
        single_se
    };
    Ok(DiffusionSplittingSummary {
        estimate,
        std_error,
        initial_conditions,
        total_iterations: iterations,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
