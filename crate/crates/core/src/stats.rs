//! Sample statistics used by the Monte Carlo checks.
//!
//! Sums go through [`pairwise_sum`] so results do not depend on how a sample
//! was partitioned. Standard errors of nonlinear statistics (variance,
//! correlation) come from batch means.

use serde::Serialize;

const PAIRWISE_LEAF: usize = 64;

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let syy: Vec<f64> = ys.iter().map(|y| (y - my) * (y - my)).collect();
    pairwise_sum(&sxy) / (pairwise_sum(&sxx) * pairwise_sum(&syy)).sqrt()
}

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.std_error
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target).abs() <= n_se
    }
}

pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    Estimate {
        value: mean(xs),
        std_error: (variance(xs) / n).sqrt(),
    }
}

/// Evaluate `stat` on the whole sample and on `batches` contiguous slices;
/// the standard error is the spread of the batch values over `sqrt(batches)`.
pub fn batch_estimate(n: usize, batches: usize, stat: impl Fn(std::ops::Range<usize>) -> f64) -> Estimate {
    assert!(batches >= 2 && n >= batches);
    let value = stat(0..n);
    let per_batch: Vec<f64> = (0..batches)
        .map(|b| stat(b * n / batches..(b + 1) * n / batches))
        .collect();
    Estimate {
        value,
        std_error: (variance(&per_batch) / batches as f64).sqrt(),
    }
}

pub fn variance_estimate(xs: &[f64], batches: usize) -> Estimate {
    batch_estimate(xs.len(), batches, |r| variance(&xs[r]))
}

pub fn correlation_estimate(xs: &[f64], ys: &[f64], batches: usize) -> Estimate {
    batch_estimate(xs.len(), batches, |r| correlation(&xs[r.clone()], &ys[r]))
}

/// Asymptotic Kolmogorov critical value `c(α)/√n_eff`, `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_critical_value(alpha: f64, n_eff: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / n_eff.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_value
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        critical_value: ks_critical_value(alpha, n),
        alpha,
    }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        critical_value: ks_critical_value(alpha, n_eff),
        alpha,
    }
}
