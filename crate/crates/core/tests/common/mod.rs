//! Helpers shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use revsmc::smc::{Particle, ParticleStatus, ReverseModel};

/// Log weight rebuilt from the stored trajectory:
/// `−ln ν(x₀) + Σ [ln P − ln Q] + ln μ(x_final)` plus the recorded
/// resampling substitutions.
pub fn recomputed_log_weight<M: ReverseModel<f64>>(model: &M, particle: &Particle<M::State, f64>) -> f64 {
    let states = particle.trajectory.states();
    let mut lw = -model.terminal_density(&states[0]).ln();
    for pair in states.windows(2) {
        let (current, pred) = (&pair[0], &pair[1]);
        let q = model.proposal_density(current, pred).expect("proposal density along a sampled path");
        lw += model.forward_density(pred, current).ln() - q.ln();
    }
    lw += model.initial_density(states.last().unwrap()).ln();
    lw + particle.log_resample_adjust
}

/// Largest relative log-space discrepancy over finished particles.
pub fn worst_telescoping_error<M: ReverseModel<f64>>(model: &M, particles: &[Particle<M::State, f64>]) -> f64 {
    particles
        .iter()
        .filter(|p| p.status == ParticleStatus::Finished)
        .map(|p| {
            let r = recomputed_log_weight(model, p);
            (r - p.log_weight).abs() / p.log_weight.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Number of finished trajectories violating the first-hitting constraint:
/// a target state after index 0, or an initial state before the end.
pub fn first_hitting_violations<M: ReverseModel<f64>>(model: &M, particles: &[Particle<M::State, f64>]) -> usize {
    particles
        .iter()
        .filter(|p| p.status == ParticleStatus::Finished)
        .filter(|p| {
            let s = p.trajectory.states();
            let n = s.len();
            s[1..].iter().any(|x| model.is_target(x))
                || s[..n - 1].iter().any(|x| model.is_initial(x))
                || !model.is_initial(&s[n - 1])
        })
        .count()
}

/// A random instance of the product chain on pairs `(z, y)`.
///
/// With probability `a(z)` only `y` moves, redrawn from `π(·|z)`; otherwise
/// `z` moves by `T` and `y` is redrawn from `π(·|z')`. The target is the last
/// `z` value, and `μ(z, y) = μ_z(z) π(y|z)`.
pub struct ProductChain {
    pub nz: usize,
    pub ny: usize,
    pub pi: Vec<Vec<f64>>,
    pub transition: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub target: Vec<bool>,
}

impl ProductChain {
    pub fn index(&self, z: usize, y: usize) -> usize {
        z * self.ny + y
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let nz = rng.random_range(3..=6);
        let ny = rng.random_range(2..=4);
        let normalized = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let pi: Vec<Vec<f64>> = (0..nz)
            .map(|_| normalized((0..ny).map(|_| rng.random_range(0.05..1.0)).collect()))
            .collect();
        let t: Vec<Vec<f64>> = (0..nz)
            .map(|_| normalized((0..nz).map(|_| rng.random_range(0.05..1.0)).collect()))
            .collect();
        let a: Vec<f64> = (0..nz).map(|_| rng.random_range(0.1..0.9)).collect();
        let n = nz * ny;
        let idx = |z: usize, y: usize| z * ny + y;
        let mut transition = DMatrix::<f64>::zeros(n, n);
        for z in 0..nz {
            for y in 0..ny {
                for y2 in 0..ny {
                    transition[(idx(z, y), idx(z, y2))] += a[z] * pi[z][y2];
                }
                for z2 in 0..nz {
                    for y2 in 0..ny {
                        transition[(idx(z, y), idx(z2, y2))] += (1.0 - a[z]) * t[z][z2] * pi[z2][y2];
                    }
                }
            }
        }
        let mu_z = normalized((0..nz - 1).map(|_| rng.random_range(0.05..1.0)).collect());
        let mut mu = vec![0.0; n];
        let mut target = vec![false; n];
        for z in 0..nz {
            for y in 0..ny {
                if z + 1 < nz {
                    mu[idx(z, y)] = mu_z[z] * pi[z][y];
                } else {
                    target[idx(z, y)] = true;
                }
            }
        }
        Self {
            nz,
            ny,
            pi,
            transition,
            mu,
            target,
        }
    }
}
