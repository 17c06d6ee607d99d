//! Minimum-variance unbiased pooling of unbiased estimators.
//!
//! With covariance Σ, the combination `wᵀσ̂` with `wᵀ1 = 1` has minimal
//! variance at `w = Σ⁻¹1 / (1ᵀΣ⁻¹1)`, where the variance is `1 / (1ᵀΣ⁻¹1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const SYMMETRY_TOL: f64 = 1e-10;

/// Above this the solve still runs but the result is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalWeightsResult {
    pub weights: Vec<f64>,
    pub variance: f64,
    /// Relative to the classical `c²` estimator, whose variance is 2.
    pub efficiency: f64,
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

fn check_symmetric(sigma: &[Vec<f64>]) -> Result<()> {
    let n = sigma.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if sigma.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("expected a square {n}x{n} matrix")));
    }
    for i in 0..n {
        for j in i + 1..n {
            let gap = (sigma[i][j] - sigma[j][i]).abs();
            if gap > SYMMETRY_TOL {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Weights minimising `wᵀΣw` subject to `wᵀ1 = 1`.
pub fn solve_optimal_weights(sigma: &[Vec<f64>]) -> Result<OptimalWeightsResult> {
    let ones = vec![1.0; sigma.len()];
    solve_mean_constrained(sigma, &ones)
}

/// Weights minimising `wᵀΣw` subject to `wᵀm = 1`; the all-ones `m` is
/// [`solve_optimal_weights`].
pub fn solve_mean_constrained(sigma: &[Vec<f64>], means: &[f64]) -> Result<OptimalWeightsResult> {
    check_symmetric(sigma)?;
    if means.len() != sigma.len() {
        return Err(Error::Dimension(format!(
            "{} means for a {}x{} matrix",
            means.len(),
            sigma.len(),
            sigma.len()
        )));
    }
    let chol = Cholesky::factor(sigma)?;
    let x = chol.solve(means);
    let precision: f64 = x.iter().zip(means).map(|(a, b)| a * b).sum();
    let weights = x.iter().map(|v| v / precision).collect();
    let condition_number = chol.condition_number(sigma);
    Ok(OptimalWeightsResult {
        weights,
        variance: 1.0 / precision,
        efficiency: 2.0 * precision,
        condition_number,
        ill_conditioned: condition_number > ILL_CONDITIONED,
    })
}
