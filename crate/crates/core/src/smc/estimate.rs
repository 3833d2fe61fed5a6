use super::{Ensemble, EstimateSummary, ReverseModel, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn summary_from<S, F: Real>(ensemble: &Ensemble<S, F>, estimate: F, log_estimate: F, std_error: F) -> EstimateSummary<F> {
    EstimateSummary {
        estimate,
        log_estimate,
        std_error,
        ess_trace: ensemble.ess_trace.clone(),
        resample_events: ensemble.resample_events,
        zeroed: ensemble.zeroed(),
        elapsed_seconds: ensemble.elapsed_seconds,
    }
}

/// Unbiased estimate `N⁻¹ Σ f(path_j) w_j` of the forward expectation.
///
/// The standard error is the sample standard deviation of `f·w` over
/// `√N`; it ignores the correlation introduced by resampling.
pub fn estimate_unconditional<S, F: Real>(
    ensemble: &Ensemble<S, F>,
    f: impl Fn(&Trajectory<S>) -> F,
) -> EstimateSummary<F> {
    let n = ensemble.len();
    let terms: Vec<(F, F)> = ensemble
        .particles
        .iter()
        .map(|p| (f(&p.trajectory), p.log_weight))
        .collect();
    let max = terms
        .iter()
        .filter(|(v, _)| *v != F::zero())
        .map(|&(_, lw)| lw)
        .fold(F::neg_infinity(), F::max);
    if n == 0 || max == F::neg_infinity() {
        return summary_from(ensemble, F::zero(), F::neg_infinity(), F::zero());
    }
    let scaled: Vec<F> = terms
        .iter()
        .map(|&(v, lw)| if v == F::zero() { F::zero() } else { v * (lw - max).exp() })
        .collect();
    let nf = F::from_count(n);
    let mean = scaled.iter().copied().sum::<F>() / nf;
    let se = if n > 1 {
        let ss: F = scaled.iter().map(|&s| (s - mean) * (s - mean)).sum();
        (ss / (nf * (nf - F::one()))).sqrt()
    } else {
        F::zero()
    };
    let scale = max.exp();
    let log_estimate = if mean > F::zero() { max + mean.ln() } else { F::neg_infinity() };
    summary_from(ensemble, mean * scale, log_estimate, se * scale)
}

/// Self-normalised estimate `Σ f w / Σ w` of the conditional expectation.
///
/// Consistent but biased for finite N. The standard error is the usual
/// delta-method approximation.
pub fn estimate_conditional<S, F: Real>(
    ensemble: &Ensemble<S, F>,
    f: impl Fn(&Trajectory<S>) -> F,
) -> Result<EstimateSummary<F>> {
    let max = ensemble
        .particles
        .iter()
        .map(|p| p.log_weight)
        .fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return Err(Error::ZeroWeights);
    }
    let pairs: Vec<(F, F)> = ensemble
        .particles
        .iter()
        .map(|p| ((p.log_weight - max).exp(), f(&p.trajectory)))
        .collect();
    let total: F = pairs.iter().map(|&(w, _)| w).sum();
    let est = pairs
        .iter()
        .filter(|(w, _)| *w > F::zero())
        .map(|&(w, v)| w * v)
        .sum::<F>()
        / total;
    let var: F = pairs
        .iter()
        .filter(|(w, _)| *w > F::zero())
        .map(|&(w, v)| w * w * (v - est) * (v - est))
        .sum();
    let log_estimate = if est > F::zero() { est.ln() } else { F::neg_infinity() };
    Ok(summary_from(ensemble, est, log_estimate, var.sqrt() / total))
}

/// Running minimum of the model level along a trajectory.
pub fn running_min_level<F: Real, M: ReverseModel<F>>(model: &M, trajectory: &Trajectory<M::State>) -> usize {
    trajectory
        .iter_rev()
        .map(|s| model.level(s))
        .min()
        .expect("trajectory is never empty")
}
