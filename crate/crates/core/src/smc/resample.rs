use rand::Rng;

use super::{Ensemble, Particle};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Effective sample size `(Σw)² / Σw²`.
pub fn ess<F: Real>(weights: &[F]) -> Result<F> {
    let max = weights.iter().copied().fold(F::zero(), F::max);
    if !(max > F::zero()) {
        return Err(Error::ZeroWeights);
    }
    // Scaling by the maximum keeps the squares representable.
    let (s, s2) = weights.iter().fold((F::zero(), F::zero()), |(s, s2), &w| {
        let r = w / max;
        (s + r, s2 + r * r)
    });
    Ok(s * s / s2)
}

/// ESS of weights given as logarithms; `-inf` entries count as zero.
pub fn ess_from_log<F: Real>(log_weights: &[F]) -> Result<F> {
    let max = log_weights.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return Err(Error::ZeroWeights);
    }
    let rel: Vec<F> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    ess(&rel)
}

fn cumulative<F: Real>(log_weights: &[F]) -> Result<Vec<F>> {
    let max = log_weights.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() || max.is_nan() {
        return Err(Error::ZeroWeights);
    }
    let mut acc = F::zero();
    Ok(log_weights
        .iter()
        .map(|&lw| {
            acc = acc + (lw - max).exp();
            acc
        })
        .collect())
}

fn search<F: Real>(cum: &[F], u: F) -> usize {
    // First index whose cumulative weight exceeds u; zero-weight entries
    // share the previous cumulative value and are never selected.
    let i = cum.partition_point(|&c| c <= u);
    i.min(cum.len() - 1)
}

/// Ancestor indices drawn i.i.d. proportionally to the weights.
pub(crate) fn multinomial_ancestors<F: Real, R: Rng + ?Sized>(
    log_weights: &[F],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let cum = cumulative(log_weights)?;
    let total = *cum.last().expect("non-empty");
    Ok((0..log_weights.len())
        .map(|_| search(&cum, F::sample_unit(rng) * total))
        .collect())
}

/// Single-uniform stratified ancestors: `(k + U)/N` quantiles.
pub(crate) fn systematic_ancestors<F: Real, R: Rng + ?Sized>(
    log_weights: &[F],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let cum = cumulative(log_weights)?;
    let total = *cum.last().expect("non-empty");
    let n = log_weights.len();
    let u = F::sample_unit(rng);
    let step = total / F::from_count(n);
    Ok((0..n)
        .map(|k| search(&cum, (F::from_count(k) + u) * step))
        .collect())
}

/// Replaces particles by copies of their ancestors and equalises weights at
/// the mean `w̄ = N⁻¹ Σ w_k`. Returns `ln w̄`.
pub(crate) fn apply_ancestors<S: Clone, F: Real>(
    particles: &mut Vec<Particle<S, F>>,
    ancestors: &[usize],
) -> F {
    let n = particles.len();
    let log_mean = log_sum_exp(particles.iter().map(|p| p.log_weight)) - F::from_count(n).ln();
    let next: Vec<Particle<S, F>> = ancestors
        .iter()
        .map(|&a| {
            let src = &particles[a];
            Particle {
                trajectory: src.trajectory.clone(),
                log_weight: log_mean,
                level: src.level,
                ancestor: a,
                status: src.status,
                log_resample_adjust: src.log_resample_adjust + (log_mean - src.log_weight),
            }
        })
        .collect();
    *particles = next;
    log_mean
}

/// Multinomial resampling of a whole ensemble.
pub fn resample_multinomial<S: Clone, F: Real, R: Rng + ?Sized>(
    ensemble: &mut Ensemble<S, F>,
    rng: &mut R,
) -> Result<()> {
    let ancestors = multinomial_ancestors(&ensemble.log_weights(), rng)?;
    let lm = apply_ancestors(&mut ensemble.particles, &ancestors);
    ensemble.log_mean_weight = Some(lm);
    ensemble.resample_events += 1;
    Ok(())
}

/// Systematic resampling of a whole ensemble.
pub fn resample_systematic<S: Clone, F: Real, R: Rng + ?Sized>(
    ensemble: &mut Ensemble<S, F>,
    rng: &mut R,
) -> Result<()> {
    let ancestors = systematic_ancestors(&ensemble.log_weights(), rng)?;
    let lm = apply_ancestors(&mut ensemble.particles, &ancestors);
    ensemble.log_mean_weight = Some(lm);
    ensemble.resample_events += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smc::{ParticleStatus, Trajectory};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ensemble(weights: &[f64]) -> Ensemble<usize, f64> {
        Ensemble {
            particles: weights
                .iter()
                .enumerate()
                .map(|(j, &w)| Particle {
                    trajectory: Trajectory::new(j),
                    log_weight: w.ln(),
                    level: 0,
                    ancestor: j,
                    status: ParticleStatus::Active,
                    log_resample_adjust: 0.0,
                })
                .collect(),
            log_mean_weight: None,
            ess_trace: vec![],
            resample_events: 0,
            elapsed_seconds: 0.0,
        }
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&[2.0_f64; 7]).unwrap() - 7.0).abs() < 1e-12);
        assert!((ess(&[1.0_f64, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((ess(&[1.0_f64, 3.0]).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(ess(&[0.0_f64, 0.0]), Err(Error::ZeroWeights));
        assert!((ess_from_log(&[-1000.0_f64, -1000.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_particle_is_unchanged() {
        let mut e = ensemble(&[0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        resample_multinomial(&mut e, &mut rng).unwrap();
        assert_eq!(e.particles[0].ancestor, 0);
        assert!((e.particles[0].weight() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn forced_ancestor() {
        let mut e = ensemble(&[0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        resample_multinomial(&mut e, &mut rng).unwrap();
        for p in &e.particles {
            assert_eq!(p.ancestor, 1);
            assert_eq!(*p.trajectory.last(), 1);
            assert!((p.weight() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_is_degenerate() {
        let mut e = ensemble(&[0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(resample_multinomial(&mut e, &mut rng), Err(Error::ZeroWeights));
    }

    #[test]
    fn systematic_keeps_expected_counts() {
        // With weights proportional to 1:3 and N = 4 the counts are exactly 1 and 3.
        let mut e = ensemble(&[0.25, 0.75, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        resample_systematic(&mut e, &mut rng).unwrap();
        let ones = e.particles.iter().filter(|p| p.ancestor == 1).count();
        assert_eq!(ones, 3);
    }

    #[test]
    fn equal_weight_ancestors_are_uniform() {
        // Chi-square over 10^5 draws with 10 categories; 1% critical value for
        // 9 degrees of freedom is 21.666.
        let n = 10;
        let mut counts = vec![0usize; n];
        let lw = vec![0.0_f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            for a in multinomial_ancestors(&lw, &mut rng).unwrap() {
                counts[a] += 1;
            }
        }
        let expected = 10_000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn resampling_is_unbiased_for_bounded_functions() {
        // E[N⁻¹ Σ g(a_j) w̄] = N⁻¹ Σ g(j) w_j.
        let w = [0.1, 0.5, 2.0, 0.0, 1.4];
        let g = [3.0, -1.0, 0.5, 7.0, 2.0];
        let n = w.len() as f64;
        let target: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / n;
        let lw: Vec<f64> = w.iter().map(|x: &f64| x.ln()).collect();
        let wbar = w.iter().sum::<f64>() / n;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let reps = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..reps {
            let anc = multinomial_ancestors(&lw, &mut rng).unwrap();
            let v = anc.iter().map(|&a| g[a] * wbar).sum::<f64>() / n;
            s += v;
            s2 += v * v;
        }
        let mean = s / reps as f64;
        let se = ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
    }
}
