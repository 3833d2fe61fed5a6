use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::resample::{apply_ancestors, ess_from_log, multinomial_ancestors, systematic_ancestors};
use super::{Ensemble, EstimateSummary, Particle, ParticleStatus, ReverseModel, Trajectory};
use crate::error::{Error, ProposalError, Result};
use crate::events::{Event, EventSink, ZeroReason};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub particles: usize,
    /// Resample when ESS < `ess_fraction · N`.
    pub ess_fraction: f64,
    pub resampling: ResamplingScheme,
    /// Reverse steps a particle may take before it is zeroed.
    pub step_cap: usize,
    pub seed: u64,
    /// Propagate particles on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            particles: 1000,
            ess_fraction: 0.5,
            resampling: ResamplingScheme::Multinomial,
            step_cap: 1_000_000,
            seed: 0,
            parallel: false,
        }
    }
}

impl EngineConfig {
    pub fn with_particles(particles: usize, seed: u64) -> Self {
        Self {
            particles,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidConfig("particles must be at least 1".into()));
        }
        if !(self.ess_fraction >= 0.0 && self.ess_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ess_fraction must lie in [0, 1], got {}",
                self.ess_fraction
            )));
        }
        if self.step_cap == 0 {
            return Err(Error::InvalidConfig("step_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<S, F> {
    pub ensemble: Ensemble<S, F>,
    pub summary: EstimateSummary<F>,
}

/// Stream 0 drives resampling; particle `j` owns stream `j + 1`.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Extends one particle until its level drops to `stop_level` (or, with no
/// barrier, until it reaches the initial set).
fn propagate<F: Real, M: ReverseModel<F>>(
    model: &M,
    particle: &mut Particle<M::State, F>,
    rng: &mut ChaCha8Rng,
    stop_level: Option<usize>,
    step_cap: usize,
) -> std::result::Result<bool, Error> {
    let mut moved = false;
    while particle.is_active() {
        if let Some(l) = stop_level {
            if particle.level <= l {
                break;
            }
        }
        match model.reverse_propose(particle.trajectory.last(), rng) {
            Ok(step) => {
                moved = true;
                if step.log_increment.is_nan() {
                    return Err(Error::Numerical("NaN incremental weight".into()));
                }
                debug_assert!(!model.is_target(&step.state), "proposal entered the target set");
                particle.log_weight = particle.log_weight + step.log_increment;
                particle.level = particle.level.min(model.level(&step.state));
                let finished = model.is_initial(&step.state);
                particle.trajectory.push(step.state);
                if finished {
                    particle.status = ParticleStatus::Finished;
                } else if particle.log_weight == F::neg_infinity() {
                    particle.status = ParticleStatus::Zeroed(ZeroReason::ZeroIncrement);
                } else if particle.trajectory.len() > step_cap {
                    particle.status = ParticleStatus::Zeroed(ZeroReason::StepCap);
                }
            }
            Err(ProposalError::EmptySupport) => {
                moved = true;
                particle.status = ParticleStatus::Zeroed(ZeroReason::EmptySupport);
            }
            Err(ProposalError::Fatal(e)) => return Err(e),
        }
    }
    if matches!(particle.status, ParticleStatus::Zeroed(_)) {
        particle.log_weight = F::neg_infinity();
    }
    Ok(moved)
}

/// Runs reverse-time multilevel SMC with `config.particles` particles.
///
/// Levels are the running minima of [`ReverseModel::level`]. At each barrier
/// the ESS is checked and the ensemble resampled when it falls below
/// `ess_fraction · N`; the particles are then extended until their level
/// drops below the current maximum. Finished particles finally collect the
/// entrance law.
pub fn run_reverse_smc<F, M>(model: &M, config: &EngineConfig, sink: &dyn EventSink) -> Result<RunOutput<M::State, F>>
where
    F: Real,
    M: ReverseModel<F>,
{
    config.validate()?;
    let start = Instant::now();
    let n = config.particles;
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|j| stream(config.seed, j as u64 + 1)).collect();
    let mut resample_rng = stream(config.seed, 0);

    let mut particles: Vec<Particle<M::State, F>> = rngs
        .iter_mut()
        .enumerate()
        .map(|(j, rng)| {
            let x0 = model.terminal_sample(rng);
            let nu = model.terminal_density(&x0);
            let level = model.level(&x0);
            let status = if !(nu > F::zero()) {
                ParticleStatus::Zeroed(ZeroReason::ZeroTerminalDensity)
            } else if model.is_initial(&x0) {
                ParticleStatus::Finished
            } else {
                ParticleStatus::Active
            };
            let log_weight = if nu > F::zero() { -nu.ln() } else { F::neg_infinity() };
            Particle {
                trajectory: Trajectory::new(x0),
                log_weight,
                level,
                ancestor: j,
                status,
                log_resample_adjust: F::zero(),
            }
        })
        .collect();

    let ess_threshold = F::lit(config.ess_fraction) * F::from_count(n);
    let mut ess_trace = Vec::new();
    let mut resample_events = 0;
    let mut log_mean_weight = None;
    let mut zero_reported = vec![false; n];

    loop {
        let Some(max_level) = particles.iter().filter(|p| p.is_active()).map(|p| p.level).max() else {
            break;
        };

        let log_w: Vec<F> = particles.iter().map(|p| p.log_weight).collect();
        let ess = match ess_from_log(&log_w) {
            Ok(e) => e,
            Err(_) => {
                sink.record(Event::Degenerate { level: max_level });
                return Err(Error::Degenerate {
                    level: max_level,
                    detail: "all particles have zero weight".into(),
                });
            }
        };
        ess_trace.push((max_level, ess));
        sink.record(Event::LevelReached {
            level: max_level,
            ess: ess.to_f64_lossy(),
            active: particles.iter().filter(|p| p.is_active()).count(),
        });
        if ess < ess_threshold {
            let ancestors = match config.resampling {
                ResamplingScheme::Multinomial => multinomial_ancestors(&log_w, &mut resample_rng)?,
                ResamplingScheme::Systematic => systematic_ancestors(&log_w, &mut resample_rng)?,
            };
            log_mean_weight = Some(apply_ancestors(&mut particles, &ancestors));
            resample_events += 1;
            sink.record(Event::Resampled {
                level: max_level,
                ess: ess.to_f64_lossy(),
            });
        }

        let stop_level = max_level.checked_sub(1);
        let step = |(p, rng): (&mut Particle<M::State, F>, &mut ChaCha8Rng)| {
            propagate(model, p, rng, stop_level, config.step_cap)
        };
        let outcomes: Vec<std::result::Result<bool, Error>> = if config.parallel {
            particles.par_iter_mut().zip(rngs.par_iter_mut()).map(step).collect()
        } else {
            particles.iter_mut().zip(rngs.iter_mut()).map(step).collect()
        };
        for o in outcomes {
            o?;
        }

        for (j, p) in particles.iter().enumerate() {
            if let ParticleStatus::Zeroed(reason) = p.status {
                if !zero_reported[j] {
                    zero_reported[j] = true;
                    sink.record(Event::ParticleZeroed { particle: j, reason });
                }
            } else {
                zero_reported[j] = false;
            }
        }
    }

    for p in particles.iter_mut() {
        if p.status == ParticleStatus::Finished {
            let mu = model.initial_density(p.trajectory.last());
            p.log_weight = if mu > F::zero() { p.log_weight + mu.ln() } else { F::neg_infinity() };
        }
    }

    let log_w: Vec<F> = particles.iter().map(|p| p.log_weight).collect();
    if log_w.iter().all(|&lw| lw == F::neg_infinity()) {
        sink.record(Event::Degenerate { level: 0 });
        return Err(Error::Degenerate {
            level: 0,
            detail: "no particle reached the initial set with positive weight".into(),
        });
    }

    let elapsed_seconds = start.elapsed().as_secs_f64();
    let ensemble = Ensemble {
        particles,
        log_mean_weight,
        ess_trace,
        resample_events,
        elapsed_seconds,
    };
    let summary = super::estimate_unconditional(&ensemble, |_| F::one());
    debug_assert!({
        let lse = log_sum_exp(log_w.iter().copied()) - F::from_count(n).ln();
        (lse - summary.log_estimate).abs() <= F::lit(1e-6) * (F::one() + lse.abs())
    });
    Ok(RunOutput { ensemble, summary })
}
