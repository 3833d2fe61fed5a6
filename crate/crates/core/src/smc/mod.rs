//! Reverse-time multilevel sequential Monte Carlo.
//!
//! Particles start in the target set, drawn from a terminal law, and are
//! extended backwards in time by a model-supplied proposal until they reach
//! the initial set. Importance weights accumulate `forward / proposal`
//! density ratios in log space. Particles stop whenever their progress level
//! drops, and the ensemble is resampled at those barriers when the effective
//! sample size falls below a threshold. A final factor of the entrance law
//! turns the ensemble into a properly weighted sample of forward paths.

mod engine;
mod estimate;
mod green;
mod resample;
mod trajectory;

use std::fmt::Debug;

use rand::Rng;

pub use engine::{run_reverse_smc, EngineConfig, ResamplingScheme, RunOutput};
pub use estimate::{estimate_conditional, estimate_unconditional, running_min_level};
pub use green::green_function_oracle;
pub use resample::{ess, ess_from_log, resample_multinomial, resample_systematic};
pub use trajectory::Trajectory;

use crate::error::ProposalError;
use crate::events::ZeroReason;
use crate::scalar::Real;

/// A predecessor sampled by a reverse proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseStep<S, F> {
    pub state: S,
    /// `ln [ P(state, current) / Q(current, state) ]`: the forward density of
    /// the step over the realized proposal density.
    pub log_increment: F,
}

/// What a concrete model supplies to the engine.
///
/// The proposal must be a proper distribution over predecessors `x` with
/// `forward_density(x, current) > 0` and `!is_target(x)`.
pub trait ReverseModel<F: Real>: Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;

    /// One-step forward density or probability `P(from, to)`.
    fn forward_density(&self, from: &Self::State, to: &Self::State) -> F;

    fn reverse_propose<R: Rng + ?Sized>(
        &self,
        current: &Self::State,
        rng: &mut R,
    ) -> Result<ReverseStep<Self::State, F>, ProposalError>;

    /// Density of proposing `predecessor` from `current`. Used to check
    /// weights independently of the sampling path.
    fn proposal_density(&self, current: &Self::State, predecessor: &Self::State) -> Result<F, ProposalError>;

    fn is_initial(&self, state: &Self::State) -> bool;
    fn is_target(&self, state: &Self::State) -> bool;

    /// Entrance law `μ`.
    fn initial_density(&self, state: &Self::State) -> F;

    /// Terminal law `ν`.
    fn terminal_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn terminal_density(&self, state: &Self::State) -> F;

    /// Progress coordinate. The particle level is its running minimum; the
    /// initial set must sit at level 0.
    fn level(&self, state: &Self::State) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleStatus {
    Active,
    /// Reached the initial set.
    Finished,
    Zeroed(ZeroReason),
}

#[derive(Debug, Clone)]
pub struct Particle<S, F> {
    pub trajectory: Trajectory<S>,
    pub log_weight: F,
    /// Running minimum of the model level along the trajectory.
    pub level: usize,
    /// Index of the particle this one was copied from at the last resampling.
    pub ancestor: usize,
    pub status: ParticleStatus,
    /// Σ over resampling events of `ln w̄ − ln w_ancestor`.
    pub log_resample_adjust: F,
}

impl<S, F: Real> Particle<S, F> {
    pub fn weight(&self) -> F {
        self.log_weight.exp()
    }

    pub fn is_active(&self) -> bool {
        self.status == ParticleStatus::Active
    }
}

/// Per-run diagnostics and the estimate of `f ≡ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary<F> {
    pub estimate: F,
    /// Natural log of `estimate`; stays finite when `estimate` underflows.
    pub log_estimate: F,
    pub std_error: F,
    /// `(level, ESS)` at each barrier, before any resampling.
    pub ess_trace: Vec<(usize, F)>,
    pub resample_events: usize,
    pub zeroed: usize,
    pub elapsed_seconds: f64,
}

impl<F: Real> EstimateSummary<F> {
    pub fn ess_min(&self) -> Option<F> {
        self.ess_trace.iter().map(|&(_, e)| e).reduce(F::min)
    }
}

/// A completed, properly weighted set of reverse trajectories.
#[derive(Debug, Clone)]
pub struct Ensemble<S, F> {
    pub particles: Vec<Particle<S, F>>,
    /// `ln w̄` at the most recent resampling, `None` if none happened.
    pub log_mean_weight: Option<F>,
    pub ess_trace: Vec<(usize, F)>,
    pub resample_events: usize,
    pub elapsed_seconds: f64,
}

impl<S, F: Real> Ensemble<S, F> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn log_weights(&self) -> Vec<F> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }

    pub fn zeroed(&self) -> usize {
        self.particles
            .iter()
            .filter(|p| matches!(p.status, ParticleStatus::Zeroed(_)))
            .count()
    }
}
