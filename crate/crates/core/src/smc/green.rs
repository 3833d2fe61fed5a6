use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Expected visits `G(μ, x)` to each non-target state before the chain is
/// absorbed in the target set, for a finite transition matrix.
///
/// Mass that `μ` places on target states is pushed through one transition
/// first, since hitting times only count steps `n > 0`. Entries for target
/// states are returned as zero.
pub fn green_function_oracle(transition: &DMatrix<f64>, mu: &[f64], target: &[bool]) -> Result<Vec<f64>> {
    let n = transition.nrows();
    if transition.ncols() != n || mu.len() != n || target.len() != n {
        return Err(Error::InvalidParams("dimension mismatch".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&i| !target[i]).collect();
    let m = free.len();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (r, &x) in free.iter().enumerate() {
        rhs[r] = mu[x]
            + (0..n)
                .filter(|&z| target[z])
                .map(|z| mu[z] * transition[(z, x)])
                .sum::<f64>();
        for (c, &z) in free.iter().enumerate() {
            // G(x) − Σ_z G(z) P(z, x) = μ'(x)
            a[(r, c)] -= transition[(z, x)];
        }
    }
    let g = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("chain is not absorbed by the target set".into()))?;
    if g.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(Error::SingularSystem("ill-conditioned Green's function system".into()));
    }
    let mut out = vec![0.0; n];
    for (r, &x) in free.iter().enumerate() {
        out[x] = g[r];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn immediate_absorption_returns_mu() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.4, 0.6, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let g = green_function_oracle(&p, &[1.0, 0.0, 0.0], &[false, true, true]).unwrap();
        assert_eq!(g, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_state_geometric_series() {
        // Staying put with probability p gives 1 + p + p² + … visits.
        let p = 0.37;
        let m = DMatrix::from_row_slice(2, 2, &[p, 1.0 - p, 0.0, 1.0]);
        let g = green_function_oracle(&m, &[1.0, 0.0], &[false, true]).unwrap();
        assert!((g[0] - 1.0 / (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn non_absorbing_chain_is_singular() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(green_function_oracle(&m, &[1.0, 0.0, 0.0], &[false, false, true]).is_err());
    }
}
