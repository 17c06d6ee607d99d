//! Range-based variance estimation for windows of a driftless Brownian
//! log-price.
//!
//! Each window is summarised by its open/high/low/close. The crate provides
//! the Garman–Klass estimator, a four-term minimum-variance unbiased
//! estimator built on the sign-flipped spreads `(C, H, L)`, the exact moment
//! and covariance tables behind it, the trivariate Siegmund density with its
//! Fisher information, and Monte Carlo tooling (Brownian and heavy-tailed
//! walks, regression-fitted quadratic estimators).

pub mod density;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod oracle;
pub mod quadrature;
pub mod regression;
pub mod simulation;
pub mod special;
pub mod stats;
pub mod types;
pub mod weights;

pub use error::{Error, Result};
pub use estimators::{
    basic_estimators, classical_estimator, estimate_series, garman_klass, garman_klass_beta_form,
    pairwise_mle_estimator, proposed_estimator, EstimatorBasis, EstimatorId, WeightVector4,
    PROPOSED_WEIGHTS,
};
pub use moments::{covariance_matrix, CovarianceMatrix4, MomentKey, MomentTable};
pub use types::{flip, spreads_from_candle, Candle, SpreadsS1, SpreadsS2};
pub use weights::{solve_optimal_weights, OptimalWeightsResult};
