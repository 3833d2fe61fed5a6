//! Engine invariants checked on every bundled model.

mod common;

use common::{first_hitting_violations, recomputed_log_weight, worst_telescoping_error, ProductChain};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revsmc::events::{CollectingSink, Event, NullSink};
use revsmc::models::atm::{AtmModel, AtmParams};
use revsmc::models::hyperbolic::{HyperbolicModel, StripParams};
use revsmc::models::sis::{simulate_forward_epidemic, Network, SisModel, SisParams};
use revsmc::smc::{
    ess, estimate_unconditional, green_function_oracle, resample_multinomial, run_reverse_smc, EngineConfig,
    Ensemble, Particle, ParticleStatus, ResamplingScheme, ReverseModel, ReverseStep, RunOutput, Trajectory,
};
use revsmc::ProposalError;

fn check_run<M: ReverseModel<f64>>(model: &M, out: &RunOutput<M::State, f64>, n: usize) {
    let particles = &out.ensemble.particles;
    let err = worst_telescoping_error(model, particles);
    assert!(err <= 1e-10, "telescoping error {err}");
    assert_eq!(first_hitting_violations(model, particles), 0);
    assert!(particles.iter().any(|p| p.status == ParticleStatus::Finished));
    for &(_, e) in &out.summary.ess_trace {
        assert!((1.0 - 1e-9..=n as f64 * (1.0 + 1e-12)).contains(&e), "ESS {e}");
    }
    for w in out.summary.ess_trace.windows(2) {
        assert!(w[1].0 < w[0].0, "barrier levels must decrease");
    }
}

fn atm() -> AtmModel<f64> {
    AtmModel::new(AtmParams::new(3, 4, 0.5, 10.0, 1.0, 3.0).unwrap(), 2).unwrap()
}

/// Large enough that resampling is triggered.
fn atm_large() -> AtmModel<f64> {
    AtmModel::new(AtmParams::new(20, 10, 0.5, 10.0, 1.0, 3.0).unwrap(), 10).unwrap()
}

fn hyperbolic() -> HyperbolicModel<f64> {
    HyperbolicModel::new(StripParams::new(-1.0, 1.0, 0.5, 1.5, 0.2, 0.01).unwrap()).unwrap()
}

fn sis() -> SisModel<f64> {
    let net = Network::grid(3, 3).unwrap();
    let p = SisParams::new(1.0, 4.0, 1.0, 1e-3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = simulate_forward_epidemic(&p, &net, 1_000_000, &mut rng).unwrap();
    SisModel::new(p, net, d.observed).unwrap()
}

#[test]
fn atm_runs_telescope_and_respect_first_hitting() {
    let m = atm_large();
    for (seed, scheme) in [(1, ResamplingScheme::Multinomial), (2, ResamplingScheme::Systematic)] {
        let cfg = EngineConfig {
            resampling: scheme,
            ..EngineConfig::with_particles(500, seed)
        };
        let out = run_reverse_smc(&m, &cfg, &NullSink).unwrap();
        assert!(out.summary.resample_events > 0);
        check_run(&m, &out, 500);
    }
}

#[test]
fn hyperbolic_runs_telescope_and_respect_first_hitting() {
    let m = hyperbolic();
    let out = run_reverse_smc(&m, &EngineConfig::with_particles(300, 3), &NullSink).unwrap();
    assert!(out.summary.resample_events > 0);
    check_run(&m, &out, 300);
    // Every finished path spans the whole horizon.
    for p in &out.ensemble.particles {
        if p.status == ParticleStatus::Finished {
            assert_eq!(p.trajectory.len(), m.steps() + 1);
        }
    }
}

#[test]
fn sis_runs_telescope_and_respect_first_hitting() {
    let m = sis();
    let out = run_reverse_smc(&m, &EngineConfig::with_particles(2000, 4), &NullSink).unwrap();
    check_run(&m, &out, 2000);
    for p in &out.ensemble.particles {
        if p.status == ParticleStatus::Finished {
            let s = p.trajectory.states();
            assert!(s.last().unwrap().is_empty());
            assert_eq!(s[s.len() - 2].len(), 1);
        }
    }
}

#[test]
fn single_particle_weight_is_the_pathwise_ratio() {
    let m = atm();
    for seed in 0..20 {
        let out = run_reverse_smc(&m, &EngineConfig::with_particles(1, seed), &NullSink).unwrap();
        assert_eq!(out.summary.resample_events, 0);
        let p = &out.ensemble.particles[0];
        assert_eq!(p.log_resample_adjust, 0.0);
        let r = recomputed_log_weight(&m, p);
        assert!((r - p.log_weight).abs() <= 1e-10 * p.log_weight.abs().max(1.0));
    }
}

#[test]
fn results_do_not_depend_on_parallelism() {
    let m = atm();
    let serial = run_reverse_smc(&m, &EngineConfig::with_particles(400, 9), &NullSink).unwrap();
    let cfg = EngineConfig {
        parallel: true,
        ..EngineConfig::with_particles(400, 9)
    };
    let par = run_reverse_smc(&m, &cfg, &NullSink).unwrap();
    assert_eq!(serial.summary.estimate.to_bits(), par.summary.estimate.to_bits());
    assert_eq!(serial.ensemble.log_weights(), par.ensemble.log_weights());
}

#[test]
fn resample_events_are_reported() {
    let m = atm_large();
    let sink = CollectingSink::default();
    let out = run_reverse_smc(&m, &EngineConfig::with_particles(300, 5), &sink).unwrap();
    let n = sink.events().iter().filter(|e| matches!(e, Event::Resampled { .. })).count();
    assert!(n > 0);
    assert_eq!(n, out.summary.resample_events);
}

/// A deterministic line `0 → 1 → 2` with `I = {0}`, `T = {2}`.
struct Line;

const P01: f64 = 0.4;
const P12: f64 = 0.25;
const MU0: f64 = 0.5;

impl ReverseModel<f64> for Line {
    type State = u8;

    fn forward_density(&self, from: &u8, to: &u8) -> f64 {
        match (from, to) {
            (0, 1) => P01,
            (1, 2) => P12,
            _ => 0.0,
        }
    }

    fn reverse_propose<R: Rng + ?Sized>(&self, current: &u8, _rng: &mut R) -> Result<ReverseStep<u8, f64>, ProposalError> {
        let state = current - 1;
        Ok(ReverseStep {
            state,
            log_increment: self.forward_density(&state, current).ln(),
        })
    }

    fn proposal_density(&self, current: &u8, predecessor: &u8) -> Result<f64, ProposalError> {
        Ok(if predecessor + 1 == *current { 1.0 } else { 0.0 })
    }

    fn is_initial(&self, s: &u8) -> bool {
        *s == 0
    }

    fn is_target(&self, s: &u8) -> bool {
        *s == 2
    }

    fn initial_density(&self, s: &u8) -> f64 {
        if *s == 0 {
            MU0
        } else {
            0.0
        }
    }

    fn terminal_sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> u8 {
        2
    }

    fn terminal_density(&self, s: &u8) -> f64 {
        if *s == 2 {
            1.0
        } else {
            0.0
        }
    }

    fn level(&self, s: &u8) -> usize {
        *s as usize
    }
}

#[test]
fn deterministic_line_weight_is_exact() {
    let out = run_reverse_smc(&Line, &EngineConfig::with_particles(4, 0), &NullSink).unwrap();
    let expected = MU0 * P01 * P12;
    for p in &out.ensemble.particles {
        assert_eq!(p.trajectory.states(), vec![2, 1, 0]);
        assert!((p.weight() - expected).abs() < 1e-15);
    }
    let s = estimate_unconditional(&out.ensemble, |_| 1.0);
    assert!((s.estimate - expected).abs() < 1e-15);
    assert_eq!(s.std_error, 0.0);
}

fn ensemble_from(weights: &[f64]) -> Ensemble<usize, f64> {
    Ensemble {
        particles: weights
            .iter()
            .enumerate()
            .map(|(j, &w)| Particle {
                trajectory: Trajectory::new(j),
                log_weight: w.ln(),
                level: 0,
                ancestor: j,
                status: ParticleStatus::Finished,
                log_resample_adjust: 0.0,
            })
            .collect(),
        log_mean_weight: None,
        ess_trace: Vec::new(),
        resample_events: 0,
        elapsed_seconds: 0.0,
    }
}

proptest! {
    #[test]
    fn ess_lies_between_one_and_n(ws in prop::collection::vec(0.0f64..1e3, 1..60)) {
        prop_assume!(ws.iter().any(|&w| w > 0.0));
        let e = ess(&ws).unwrap();
        prop_assert!(e >= 1.0 - 1e-12 && e <= ws.len() as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn resampled_weights_are_equal_to_the_mean(ws in prop::collection::vec(0.0f64..1e3, 1..60), seed in any::<u64>()) {
        prop_assume!(ws.iter().any(|&w| w > 0.0));
        let mut e = ensemble_from(&ws);
        let mean = ws.iter().sum::<f64>() / ws.len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        resample_multinomial(&mut e, &mut rng).unwrap();
        for p in &e.particles {
            prop_assert_eq!(p.log_weight, e.particles[0].log_weight);
            prop_assert!((p.weight() - mean).abs() <= 1e-12 * mean);
            prop_assert!(ws[*p.trajectory.last()] > 0.0);
        }
    }
}

#[test]
fn proposition_one_holds_on_random_product_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let c = ProductChain::random(&mut rng);
        let g = green_function_oracle(&c.transition, &c.mu, &c.target).unwrap();
        for z in 0..c.nz - 1 {
            for y in 0..c.ny {
                for y2 in 0..c.ny {
                    let lhs = g[c.index(z, y)] / g[c.index(z, y2)];
                    let rhs = c.pi[z][y] / c.pi[z][y2];
                    worst = worst.max((lhs - rhs).abs() / rhs);
                }
            }
        }
    }
    assert!(worst < 1e-8, "{worst}");
}

