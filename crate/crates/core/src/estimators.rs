//! Per-window variance estimators and their averages over many windows.
//!
//! Every estimator here is unbiased for σ² (per unit window) when the log-price
//! is a driftless Brownian motion, and quadratic in the spreads, so it scales
//! as `k²` when the spreads scale by `k`. Per-window values of the
//! Garman–Klass quadratic can be negative; they are returned as-is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::hl_normalizer;
use crate::stats::pairwise_sum;
use crate::types::{flip, spreads_from_candle, Candle, SpreadsS1, SpreadsS2};

/// Weights of the minimum-variance combination of the four basic estimators,
/// as published to six decimals. [`crate::weights::solve_optimal_weights`]
/// on [`crate::moments::covariance_matrix`] recovers them to full precision.
pub const PROPOSED_WEIGHTS: WeightVector4 = WeightVector4([0.273520, 0.160358, 0.365212, 0.200910]);

/// Garman–Klass coefficients on `(h - l)²`, `c(h + l) - 2hl` and `c²`.
pub const GK_RANGE: f64 = 0.511;
pub const GK_CROSS: f64 = 0.019;
pub const GK_CLOSE: f64 = 0.383;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// The four unbiased building blocks evaluated on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBasis {
    /// `2[(H - C)² + L²]`
    pub sig1: f64,
    /// `C²`
    pub sig2: f64,
    /// `2(H - C - L)C`
    pub sig3: f64,
    /// `-(H - C)L / (2 log 2 - 5/4)`
    pub sig4: f64,
}

impl EstimatorBasis {
    pub fn as_array(&self) -> [f64; 4] {
        [self.sig1, self.sig2, self.sig3, self.sig4]
    }

    pub fn dot(&self, w: &[f64; 4]) -> f64 {
        self.as_array().iter().zip(w).map(|(x, a)| x * a).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector4(pub [f64; 4]);

impl WeightVector4 {
    pub const EQUAL: WeightVector4 = WeightVector4([0.25; 4]);

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn check_unbiased(&self) -> Result<()> {
        let sum = self.sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightsNotNormalized { sum });
        }
        Ok(())
    }
}

pub fn basic_estimators(s: SpreadsS2) -> EstimatorBasis {
    let overshoot = s.overshoot();
    let undershoot = s.undershoot();
    EstimatorBasis {
        sig1: 2.0 * (overshoot * overshoot + undershoot * undershoot),
        sig2: s.close * s.close,
        sig3: 2.0 * (overshoot + undershoot) * s.close,
        sig4: overshoot * undershoot / hl_normalizer(),
    }
}

/// Weighted combination of the basic estimators. The weights must sum to 1.
pub fn proposed_estimator(s: SpreadsS2, weights: &WeightVector4) -> Result<f64> {
    weights.check_unbiased()?;
    Ok(basic_estimators(s).dot(&weights.0))
}

pub fn garman_klass(s: SpreadsS1) -> f64 {
    let SpreadsS1 { c, h, l } = s;
    GK_RANGE * (h - l) * (h - l) - GK_CROSS * (c * (h + l) - 2.0 * h * l) - GK_CLOSE * c * c
}

/// Garman–Klass rewritten on the basic estimators. The fourth coefficient
/// uses the exact `2 log 2 - 5/4`, not its four-decimal rounding.
pub fn garman_klass_beta() -> [f64; 4] {
    [
        GK_RANGE / 2.0,
        GK_RANGE - GK_CLOSE - GK_CROSS,
        GK_RANGE - GK_CROSS / 2.0,
        2.0 * (GK_RANGE - GK_CROSS) * hl_normalizer(),
    ]
}

pub fn garman_klass_beta_form(s: SpreadsS2) -> f64 {
    basic_estimators(s).dot(&garman_klass_beta())
}

/// `c²`
pub fn classical_estimator(s: SpreadsS1) -> f64 {
    s.c * s.c
}

/// Mean of the two pairwise maximum-likelihood estimators `(2H - C)²/3`
/// (from `(C, H)`) and `(2L - C)²/3` (from `(C, L)`).
pub fn pairwise_mle_estimator(s: SpreadsS2) -> f64 {
    let from_high = 2.0 * s.high - s.close;
    let from_low = 2.0 * s.low - s.close;
    (from_high * from_high + from_low * from_low) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorId {
    Classical,
    GarmanKlass,
    Proposed,
    Basis1,
    Basis2,
    Basis3,
    Basis4,
    PairwiseMle,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 8] = [
        EstimatorId::Classical,
        EstimatorId::GarmanKlass,
        EstimatorId::Proposed,
        EstimatorId::Basis1,
        EstimatorId::Basis2,
        EstimatorId::Basis3,
        EstimatorId::Basis4,
        EstimatorId::PairwiseMle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::Classical => "classical",
            EstimatorId::GarmanKlass => "gk",
            EstimatorId::Proposed => "proposed",
            EstimatorId::Basis1 => "basis1",
            EstimatorId::Basis2 => "basis2",
            EstimatorId::Basis3 => "basis3",
            EstimatorId::Basis4 => "basis4",
            EstimatorId::PairwiseMle => "pairwise-mle",
        }
    }

    /// Evaluate on one window's spreads.
    pub fn apply(&self, s: SpreadsS1) -> f64 {
        let s2 = flip(s);
        match self {
            EstimatorId::Classical => classical_estimator(s),
            EstimatorId::GarmanKlass => garman_klass(s),
            EstimatorId::Proposed => basic_estimators(s2).dot(&PROPOSED_WEIGHTS.0),
            EstimatorId::Basis1 => basic_estimators(s2).sig1,
            EstimatorId::Basis2 => basic_estimators(s2).sig2,
            EstimatorId::Basis3 => basic_estimators(s2).sig3,
            EstimatorId::Basis4 => basic_estimators(s2).sig4,
            EstimatorId::PairwiseMle => pairwise_mle_estimator(s2),
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub mean: f64,
    pub per_window: Vec<f64>,
}

/// Apply `method` to every window and average. Invalid candles are reported
/// with their index.
pub fn estimate_series(windows: &[Candle], method: EstimatorId) -> Result<SeriesEstimate> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_window = windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            spreads_from_candle(w)
                .map(|s| method.apply(s))
                .map_err(|e| e.in_window(i))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = pairwise_sum(&per_window) / per_window.len() as f64;
    Ok(SeriesEstimate { mean, per_window })
}
