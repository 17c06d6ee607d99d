//! The trivariate law of `(c, h, l)` for a standard Brownian window, its
//! pairwise marginals, the Fisher information for σ², and a check that the
//! family is not of exponential type.
//!
//! `Q(ξ, a, b)` is the density of the endpoint `ξ` of a path kept inside
//! `(a, b)`; the joint density of `(c, l, h)` at `(ξ, a, b)` is
//! `-∂²Q/∂a∂b`. Two representations are used:
//!
//! * the method-of-images series `Σ_j φ(ξ - 2jw) - φ(ξ - 2a - 2jw)`,
//!   `w = b - a`, which converges fast for wide strips, and whose mixed
//!   derivative is taken term by term in closed form;
//! * the eigenfunction series of the killed heat kernel, which converges fast
//!   for narrow strips and keeps full relative accuracy where the image series
//!   suffers cancellation. Its mixed derivative is exact via hyper-dual
//!   arithmetic.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::special::{phi, phi_dd};
use crate::stats::{mean_estimate, pairwise_sum};

/// Below this strip width the eigenfunction series is used for the density.
pub const SPECTRAL_WIDTH: f64 = 1.5;

/// Quadrature box at σ = 1: `a ∈ (-EXTENT, 0)`, `b ∈ (0, EXTENT)`. The mass
/// outside is below `4 Φ*(6) ≈ 4e-9`.
pub const EXTENT: f64 = 6.0;

/// Gauss–Legendre points per panel for the trivariate rules.
const POINTS_PER_PANEL: usize = 8;

/// Fisher score step in θ (relative); refined once by Richardson extrapolation.
pub const SCORE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTruncation {
    pub max_abs_j: usize,
    pub tolerance: f64,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            max_abs_j: 16,
            tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn check_domain(xi: f64, a: f64, b: f64) -> Result<()> {
    if !(xi.is_finite() && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("non-finite point ({xi}, {a}, {b})")));
    }
    if !(a < xi.min(0.0) && xi.max(0.0) < b) {
        return Err(Error::Domain(format!(
            "need a < min(xi, 0) <= max(xi, 0) < b, got xi={xi}, a={a}, b={b}"
        )));
    }
    Ok(())
}

/// Sum of `bound(2|j|w - shift)` over `|j| > J`, both signs.
fn image_tail(max_abs_j: usize, width: f64, shift: f64, bound: impl Fn(f64) -> f64, weight: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut j = max_abs_j + 1;
    loop {
        let jf = j as f64;
        let term = 2.0 * weight(jf) * bound(2.0 * jf * width - shift);
        total += term;
        if (term < 1e-300 || term < total * 1e-17) && 2.0 * jf * width - shift > 1.0 {
            break;
        }
        j += 1;
        if j > max_abs_j + 1_000_000 {
            return f64::INFINITY;
        }
    }
    total
}

fn phi_bound(t: f64) -> f64 {
    phi(t.max(0.0))
}

/// Bound on `|φ''(u)|` for `|u| >= t`.
fn phi_dd_bound(t: f64) -> f64 {
    if t <= 1.0 {
        // max of (u² + 1)φ(u) over u >= 0 is at u = 1
        2.0 * phi(1.0)
    } else {
        (t * t + 1.0) * phi(t)
    }
}

/// Image series for `Q(ξ, a, b)` truncated at `|j| <= J`, with a bound on
/// what the dropped terms could add.
pub fn siegmund_q(xi: f64, a: f64, b: f64, trunc: &SeriesTruncation) -> Result<SeriesValue> {
    check_domain(xi, a, b)?;
    let w = b - a;
    let jmax = trunc.max_abs_j as i64;
    let terms: Vec<f64> = (-jmax..=jmax)
        .map(|j| {
            let shift = 2.0 * j as f64 * w;
            phi(xi - shift) - phi(xi - 2.0 * a - shift)
        })
        .collect();
    let value = pairwise_sum(&terms);
    let tail_bound = image_tail(trunc.max_abs_j, w, xi.abs(), phi_bound, |_| 1.0)
        + image_tail(trunc.max_abs_j, w, xi.abs() + 2.0 * a.abs(), phi_bound, |_| 1.0);
    if tail_bound > trunc.tolerance {
        return Err(Error::TruncationInsufficient {
            max_abs_j: trunc.max_abs_j,
            tail_bound,
            tolerance: trunc.tolerance,
        });
    }
    Ok(SeriesValue { value, tail_bound })
}

fn spectral_terms(w: f64) -> usize {
    // exp(-n²π²/(2w²)) < e^-60
    ((120.0f64).sqrt() * w / PI).ceil() as usize + 2
}

/// `Q(ξ, a, b)` from the eigenfunction expansion of the killed heat kernel.
pub fn siegmund_q_spectral(xi: f64, a: f64, b: f64) -> Result<f64> {
    check_domain(xi, a, b)?;
    let w = b - a;
    let sum: f64 = (1..=spectral_terms(w))
        .map(|n| {
            let k = n as f64 * PI / w;
            (k * -a).sin() * (k * (xi - a)).sin() * (-0.5 * k * k).exp()
        })
        .sum();
    Ok(2.0 / w * sum)
}

/// Hyper-dual number `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HyperDual {
    re: f64,
    e1: f64,
    e2: f64,
    e12: f64,
}

impl HyperDual {
    fn constant(re: f64) -> Self {
        Self { re, e1: 0.0, e2: 0.0, e12: 0.0 }
    }

    /// Lift a scalar function given its value and first two derivatives at `re`.
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }

    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.lift(s, c, -s)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.lift(e, e, e)
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.re;
        self.lift(r, -r * r, 2.0 * r * r * r)
    }

    fn scale(self, k: f64) -> Self {
        Self {
            re: k * self.re,
            e1: k * self.e1,
            e2: k * self.e2,
            e12: k * self.e12,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e12: self.e12 + o.e12,
        }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

/// `-∂²Q/∂a∂b` from the eigenfunction series.
fn spectral_density(xi: f64, a: f64, b: f64) -> f64 {
    let a_hd = HyperDual { re: a, e1: 1.0, e2: 0.0, e12: 0.0 };
    let b_hd = HyperDual { re: b, e1: 0.0, e2: 1.0, e12: 0.0 };
    let xi_hd = HyperDual::constant(xi);
    let w = b_hd - a_hd;
    let inv_w = w.recip();
    let mut sum = HyperDual::constant(0.0);
    for n in 1..=spectral_terms(b - a) {
        let k = inv_w.scale(n as f64 * PI);
        let start = (k * (-a_hd)).sin();
        let end = (k * (xi_hd - a_hd)).sin();
        let decay = (k * k).scale(-0.5).exp();
        sum = sum + start * end * decay;
    }
    -(inv_w.scale(2.0) * sum).e12
}

/// `-∂²Q/∂a∂b` from the image series, term by term:
/// `Σ_j 4j² φ''(ξ - 2jw) - 4j(j-1) φ''(ξ - 2a - 2jw)`.
fn image_density(xi: f64, a: f64, b: f64, max_abs_j: usize) -> SeriesValue {
    let w = b - a;
    let jmax = max_abs_j as i64;
    let terms: Vec<f64> = (-jmax..=jmax)
        .filter(|&j| j != 0)
        .map(|j| {
            let jf = j as f64;
            let shift = 2.0 * jf * w;
            4.0 * jf * jf * phi_dd(xi - shift) - 4.0 * jf * (jf - 1.0) * phi_dd(xi - 2.0 * a - shift)
        })
        .collect();
    let tail_bound = image_tail(max_abs_j, w, xi.abs(), phi_dd_bound, |j| 4.0 * j * j)
        + image_tail(max_abs_j, w, xi.abs() + 2.0 * a.abs(), phi_dd_bound, |j| 4.0 * (j * j + j));
    SeriesValue {
        value: pairwise_sum(&terms),
        tail_bound,
    }
}

/// Image-series density with its truncation bound; errors if the bound
/// exceeds the tolerance.
pub fn joint_density_chl_image(xi: f64, a: f64, b: f64, trunc: &SeriesTruncation) -> Result<SeriesValue> {
    check_domain(xi, a, b)?;
    let v = image_density(xi, a, b, trunc.max_abs_j);
    if v.tail_bound > trunc.tolerance {
        return Err(Error::TruncationInsufficient {
            max_abs_j: trunc.max_abs_j,
            tail_bound: v.tail_bound,
            tolerance: trunc.tolerance,
        });
    }
    Ok(v)
}

/// Eigenfunction-series density (exact mixed derivative).
pub fn joint_density_chl_spectral(xi: f64, a: f64, b: f64) -> Result<f64> {
    check_domain(xi, a, b)?;
    Ok(spectral_density(xi, a, b))
}

#[inline]
fn density_unchecked(xi: f64, a: f64, b: f64, trunc: &SeriesTruncation) -> f64 {
    if b - a < SPECTRAL_WIDTH {
        return spectral_density(xi, a, b);
    }
    let v = image_density(xi, a, b, trunc.max_abs_j);
    if v.tail_bound <= trunc.tolerance {
        v.value
    } else {
        spectral_density(xi, a, b)
    }
}

/// Joint density of `(c, l, h)` at `(ξ, a, b)` for a standard Brownian window.
///
/// Narrow strips use the eigenfunction series; wide ones the image series
/// truncated at `trunc`, falling back to the eigenfunction series if the
/// truncation bound is not met.
pub fn joint_density_chl(xi: f64, a: f64, b: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_domain(xi, a, b)?;
    Ok(density_unchecked(xi, a, b, trunc))
}

/// Joint density of the flipped triple `(C, H, L)`: twice the `(c, h, l)`
/// density on `C > 0`.
pub fn joint_density_s2(close: f64, high: f64, low: f64, trunc: &SeriesTruncation) -> Result<f64> {
    if !(close > 0.0) {
        return Err(Error::Domain(format!("C must be > 0, got {close}")));
    }
    Ok(2.0 * joint_density_chl(close, low, high, trunc)?)
}

/// Density of `(H, C)` at `(x, y)`, `0 < y < x`.
pub fn pair_density_hc(x: f64, y: f64) -> Result<f64> {
    if !(0.0 < y && y < x && x.is_finite()) {
        return Err(Error::Domain(format!("need 0 < y < x, got x={x}, y={y}")));
    }
    let u = 2.0 * x - y;
    Ok(4.0 * u * phi(u))
}

/// Density of `(L, C)` at `(z, y)`, `z < 0 < y`.
pub fn pair_density_lc(z: f64, y: f64) -> Result<f64> {
    if !(z < 0.0 && 0.0 < y && z.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!("need z < 0 < y, got z={z}, y={y}")));
    }
    let u = y - 2.0 * z;
    Ok(4.0 * u * phi(u))
}

/// A tensor Gauss–Legendre rule over `a ∈ (-EXTENT, 0)`, `b ∈ (0, EXTENT)`,
/// `s ∈ (0, 1)` with `panels` panels per axis.
#[derive(Debug, Clone)]
pub struct ChlQuadrature {
    lows: Vec<(f64, f64)>,
    highs: Vec<(f64, f64)>,
    fractions: Vec<(f64, f64)>,
    pub trunc: SeriesTruncation,
}

impl ChlQuadrature {
    pub fn new(panels: usize) -> Self {
        let rule = GaussLegendre::new(POINTS_PER_PANEL);
        Self {
            lows: rule.composite(-EXTENT, 0.0, panels),
            highs: rule.composite(0.0, EXTENT, panels),
            fractions: rule.composite(0.0, 1.0, panels),
            trunc: SeriesTruncation::default(),
        }
    }

    pub fn points(&self) -> usize {
        self.lows.len() * self.highs.len() * self.fractions.len()
    }

    /// `∫∫∫ g(ξ, a, b) f(ξ, a, b)` over the full domain `a < ξ < b`.
    pub fn expect(&self, g: impl Fn(f64, f64, f64) -> f64 + Sync) -> f64 {
        self.sweep(|a, b, s| {
            let xi = a + s * (b - a);
            (b - a, xi)
        }, &g)
    }

    /// `2 ∫∫∫ g f` over the half `ξ > 0`; for `g` invariant under
    /// `(ξ, a, b) ↦ (-ξ, -b, -a)` this equals [`ChlQuadrature::expect`].
    pub fn expect_positive_close(&self, g: impl Fn(f64, f64, f64) -> f64 + Sync) -> f64 {
        2.0 * self.sweep(|_, b, s| (b, s * b), &g)
    }

    fn sweep(&self, map: impl Fn(f64, f64, f64) -> (f64, f64) + Sync, g: &(impl Fn(f64, f64, f64) -> f64 + Sync)) -> f64 {
        let per_low: Vec<f64> = self
            .lows
            .par_iter()
            .map(|&(a, wa)| {
                let mut inner = Vec::with_capacity(self.highs.len());
                for &(b, wb) in &self.highs {
                    let mut acc = 0.0;
                    for &(s, ws) in &self.fractions {
                        let (jac, xi) = map(a, b, s);
                        let f = density_unchecked(xi, a, b, &self.trunc);
                        if f != 0.0 {
                            acc += ws * jac * f * g(xi, a, b);
                        }
                    }
                    inner.push(wb * acc);
                }
                wa * pairwise_sum(&inner)
            })
            .collect();
        pairwise_sum(&per_low)
    }
}

/// `log f_θ(x)` for the scale family `f_θ(x) = θ^{-3/2} f₁(x/√θ)`, θ = σ².
pub fn log_density_theta(xi: f64, a: f64, b: f64, theta: f64, trunc: &SeriesTruncation) -> f64 {
    let r = theta.sqrt().recip();
    -1.5 * theta.ln() + density_unchecked(xi * r, a * r, b * r, trunc).ln()
}

/// `d/dθ g(θ)` by central differences at steps `h` and `h/2`, combined by
/// Richardson extrapolation.
pub fn richardson_derivative(g: impl Fn(f64) -> f64, theta: f64) -> f64 {
    let h = SCORE_STEP * theta;
    let d = |h: f64| (g(theta + h) - g(theta - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Score `∂/∂θ log f_θ` of the `(c, h, l)` law at one point.
pub fn score(xi: f64, a: f64, b: f64, theta: f64, trunc: &SeriesTruncation) -> f64 {
    richardson_derivative(|t| log_density_theta(xi, a, b, t, trunc), theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    Quadrature,
    MonteCarlo,
}

/// Fisher information for θ = σ² per window, at σ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherResult {
    pub information: f64,
    /// Cramér–Rao bound `1/I` on the variance of unbiased estimators.
    pub cr_bound: f64,
    /// `2I`: the best attainable efficiency relative to `c²`.
    pub efficiency_bound: f64,
    pub method: FisherMethod,
    pub resolution: usize,
    /// The information at the next coarser resolution.
    pub coarser_information: f64,
    pub relative_change: f64,
}

impl FisherResult {
    fn new(method: FisherMethod, resolution: usize, information: f64, coarser: f64) -> Self {
        Self {
            information,
            cr_bound: 1.0 / information,
            efficiency_bound: 2.0 * information,
            method,
            resolution,
            coarser_information: coarser,
            relative_change: ((information - coarser) / information).abs(),
        }
    }
}

/// Relative agreement required between successive refinements.
pub const REFINEMENT_TOL: f64 = 1e-3;

/// `E[score²]` on a quadrature rule.
pub fn fisher_information_quadrature(panels: usize) -> f64 {
    let quad = ChlQuadrature::new(panels);
    let trunc = quad.trunc;
    quad.expect_positive_close(|xi, a, b| {
        let s = score(xi, a, b, 1.0, &trunc);
        s * s
    })
}

/// Fisher information by quadrature (`resolution` = panels per axis, the
/// coarser pass uses two thirds of that) or Monte Carlo over bridge-refined
/// Brownian windows (`resolution` = sample count, compared with its first half).
pub fn fisher_information(method: FisherMethod, resolution: usize) -> Result<FisherResult> {
    match method {
        FisherMethod::Quadrature => {
            let resolution = resolution.max(3);
            let coarse = fisher_information_quadrature((2 * resolution).div_ceil(3));
            let fine = fisher_information_quadrature(resolution);
            let result = FisherResult::new(method, resolution, fine, coarse);
            if result.relative_change > REFINEMENT_TOL {
                return Err(Error::ResolutionTooCoarse { coarse, fine });
            }
            Ok(result)
        }
        FisherMethod::MonteCarlo => {
            if resolution < 1000 {
                return Err(Error::ResolutionTooCoarse { coarse: f64::NAN, fine: f64::NAN });
            }
            let windows = crate::simulation::simulate_brownian(resolution, crate::simulation::BRIDGE_STEPS, 0x5EED_F15E);
            let trunc = SeriesTruncation::default();
            let squares: Vec<f64> = windows
                .par_iter()
                .map(|w| {
                    let s2 = crate::types::flip(*w);
                    if s2.close <= 0.0 || s2.low >= 0.0 || s2.high <= s2.close {
                        return 0.0;
                    }
                    let s = score(s2.close, s2.low, s2.high, 1.0, &trunc);
                    s * s
                })
                .collect();
            let full = mean_estimate(&squares);
            let half = mean_estimate(&squares[..squares.len() / 2]);
            let result = FisherResult::new(method, resolution, full.value, half.value);
            let tol = REFINEMENT_TOL.max(4.0 * half.std_error / half.value);
            if result.relative_change > tol {
                return Err(Error::ResolutionTooCoarse {
                    coarse: half.value,
                    fine: full.value,
                });
            }
            Ok(result)
        }
    }
}

/// Least-squares fit `y ≈ slope·x + intercept` and its quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub max_residual: f64,
}

pub fn affine_fit(x: &[f64], y: &[f64]) -> Result<AffineFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::DegenerateGrid(format!("need >= 3 paired scores, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxx = pairwise_sum(&x.iter().map(|v| (v - mx) * (v - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).collect::<Vec<_>>());
    let syy = pairwise_sum(&y.iter().map(|v| (v - my) * (v - my)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::DegenerateGrid("scores are constant over the grid".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(u, v)| v - (slope * u + intercept)).collect();
    let sse = pairwise_sum(&residuals.iter().map(|r| r * r).collect::<Vec<_>>());
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(AffineFit {
        slope,
        intercept,
        r_squared,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialityCheck {
    pub theta1: f64,
    pub theta2: f64,
    pub points: usize,
    pub fit: AffineFit,
}

/// The regular `n³` grid used by default: `b ∈ [0.4, 3]`, `a ∈ [-2.5, -0.1]`,
/// `ξ = s·b` with `s ∈ [0.05, 0.95]`.
pub fn default_grid(per_axis: usize) -> Vec<(f64, f64, f64)> {
    let lin = |lo: f64, hi: f64, i: usize| {
        if per_axis == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
        }
    };
    let mut grid = Vec::with_capacity(per_axis.pow(3));
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let b = lin(0.4, 3.0, i);
                let a = lin(-2.5, -0.1, j);
                let xi = lin(0.05, 0.95, k) * b;
                grid.push((xi, a, b));
            }
        }
    }
    grid
}

fn distinct_points(grid: &[(f64, f64, f64)]) -> usize {
    let mut pts: Vec<[u64; 3]> = grid.iter().map(|&(x, a, b)| [x.to_bits(), a.to_bits(), b.to_bits()]).collect();
    pts.sort_unstable();
    pts.dedup();
    pts.len()
}

/// Fit `score(θ₂) ≈ u·score(θ₁) + v` over the grid. In a one-parameter
/// exponential family the scores at two parameter values are exactly
/// affinely related, so `r² < 1` shows the family is not exponential.
pub fn exponentiality_diagnostic(theta1: f64, theta2: f64, grid: &[(f64, f64, f64)]) -> Result<ExponentialityCheck> {
    for t in [theta1, theta2] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("theta must be > 0, got {t}")));
        }
    }
    if distinct_points(grid) < 3 {
        return Err(Error::DegenerateGrid("fewer than 3 distinct points".into()));
    }
    for &(xi, a, b) in grid {
        check_domain(xi, a, b)?;
    }
    let trunc = SeriesTruncation::default();
    let s1: Vec<f64> = grid.iter().map(|&(x, a, b)| score(x, a, b, theta1, &trunc)).collect();
    let s2: Vec<f64> = grid.iter().map(|&(x, a, b)| score(x, a, b, theta2, &trunc)).collect();
    Ok(ExponentialityCheck {
        theta1,
        theta2,
        points: grid.len(),
        fit: affine_fit(&s1, &s2)?,
    })
}

/// The same diagnostic on the scale-normal law of `C` alone (a half-normal
/// with variance θ), which is an exponential family.
pub fn scale_normal_control(theta1: f64, theta2: f64, closes: &[f64]) -> Result<ExponentialityCheck> {
    let log_f = |y: f64, t: f64| (2.0 * phi(y / t.sqrt()) / t.sqrt()).ln();
    let s1: Vec<f64> = closes.iter().map(|&y| richardson_derivative(|t| log_f(y, t), theta1)).collect();
    let s2: Vec<f64> = closes.iter().map(|&y| richardson_derivative(|t| log_f(y, t), theta2)).collect();
    Ok(ExponentialityCheck {
        theta1,
        theta2,
        points: closes.len(),
        fit: affine_fit(&s1, &s2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive, adaptive_semi_infinite};
    use crate::special::big_phi_upper;
    use rand::{Rng, SeedableRng};

    fn trunc() -> SeriesTruncation {
        SeriesTruncation::default()
    }

    #[test]
    fn q_domain_errors() {
        assert!(siegmund_q(0.5, 0.1, 1.0, &trunc()).is_err());
        assert!(siegmund_q(1.5, -1.0, 1.0, &trunc()).is_err());
        assert!(siegmund_q(0.0, -1.0, 0.0, &trunc()).is_err());
        assert!(joint_density_chl(0.2, -0.3, 0.1, &trunc()).is_err());
        assert!(pair_density_hc(1.0, 1.0).is_err());
        assert!(pair_density_lc(0.0, 1.0).is_err());
    }

    #[test]
    fn q_wide_strip_is_normal_density() {
        for &xi in &[-1.3, 0.0, 0.7] {
            let q = siegmund_q(xi, -30.0, 30.0, &trunc()).unwrap();
            assert!((q.value - phi(xi)).abs() < 1e-15);
        }
    }

    #[test]
    fn q_reflection_symmetry_and_spectral_agreement() {
        for &(xi, a, b) in &[(0.3, -0.8, 1.1), (-0.5, -1.0, 0.4), (1.2, -2.0, 2.5)] {
            let q = siegmund_q(xi, a, b, &trunc()).unwrap().value;
            let mirrored = siegmund_q(-xi, -b, -a, &trunc()).unwrap().value;
            assert!((q - mirrored).abs() < 1e-14);
            let spectral = siegmund_q_spectral(xi, a, b).unwrap();
            assert!((q - spectral).abs() < 1e-13, "{q} vs {spectral}");
        }
    }

    #[test]
    fn q_truncation_is_reported() {
        let coarse = SeriesTruncation { max_abs_j: 1, tolerance: 1e-14 };
        assert!(matches!(
            siegmund_q(0.0, -0.05, 0.05, &coarse),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn doubling_j_stays_within_tail_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let base = SeriesTruncation { max_abs_j: 8, tolerance: 1.0 };
        let doubled = SeriesTruncation { max_abs_j: 16, tolerance: 1.0 };
        for _ in 0..10_000 {
            let a = -rng.random_range(0.05..4.0);
            let b = rng.random_range(0.05..4.0);
            let xi = rng.random_range(a..b);
            if xi <= a || xi >= b {
                continue;
            }
            let q = siegmund_q(xi, a, b, &base).unwrap();
            let q2 = siegmund_q(xi, a, b, &doubled).unwrap();
            assert!((q.value - q2.value).abs() <= q.tail_bound + 1e-15);
        }
    }

    #[test]
    fn density_representations_agree() {
        for &(xi, a, b) in &[(0.3, -0.8, 1.1), (-0.5, -1.0, 0.6), (1.2, -0.7, 1.5), (0.1, -2.0, 2.5), (2.0, -1.5, 3.0)] {
            let img = joint_density_chl_image(xi, a, b, &trunc()).unwrap().value;
            let spec = joint_density_chl_spectral(xi, a, b).unwrap();
            assert!((img - spec).abs() < 1e-12 * (1.0 + img.abs()), "({xi},{a},{b}): {img} vs {spec}");
        }
    }

    #[test]
    fn density_matches_finite_difference_of_q() {
        let (xi, a, b) = (0.4, -0.9, 1.6);
        let h = 1e-4;
        let q = |a: f64, b: f64| siegmund_q(xi, a, b, &trunc()).unwrap().value;
        let fd = -(q(a + h, b + h) - q(a + h, b - h) - q(a - h, b + h) + q(a - h, b - h)) / (4.0 * h * h);
        let f = joint_density_chl(xi, a, b, &trunc()).unwrap();
        assert!((fd - f).abs() < 1e-6, "{fd} vs {f}");
    }

    #[test]
    fn density_is_nonnegative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut checked = 0;
        while checked < 100_000 {
            let a = -rng.random_range(0.0..5.0);
            let b = rng.random_range(0.0..5.0);
            let xi = a + (b - a) * rng.random::<f64>();
            if check_domain(xi, a, b).is_err() {
                continue;
            }
            let f = joint_density_chl(xi, a, b, &trunc()).unwrap();
            assert!(f >= 0.0, "f({xi},{a},{b}) = {f}");
            checked += 1;
        }
    }

    #[test]
    fn pair_densities() {
        assert!(pair_density_hc(40.0, 1.0).unwrap() < 1e-300);
        // normalisation: inner integral over x in (y, ∞) is 2φ(y)·... done numerically
        let total = adaptive_semi_infinite(
            |y| adaptive_semi_infinite(|x| pair_density_hc(x, y).unwrap_or(0.0), y, 1e-13),
            0.0,
            1e-12,
        );
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let e_ch = adaptive_semi_infinite(
            |y| adaptive_semi_infinite(|x| x * y * pair_density_hc(x, y).unwrap_or(0.0), y, 1e-13),
            0.0,
            1e-12,
        );
        assert!((e_ch - 1.25).abs() < 1e-6, "{e_ch}");
        let e_cl = adaptive_semi_infinite(
            |y| adaptive_semi_infinite(|t| -t * y * pair_density_lc(-t, y).unwrap_or(0.0), 0.0, 1e-13),
            0.0,
            1e-12,
        );
        assert!((e_cl + 0.25).abs() < 1e-6, "{e_cl}");
    }

    #[test]
    fn tail_integral_identities() {
        for &k in &[0.5, 1.0, 2.0] {
            let i3 = adaptive_semi_infinite(|b| b.powi(3) * big_phi_upper(k * b), 0.0, 1e-12);
            let i1 = adaptive_semi_infinite(|b| b * big_phi_upper(k * b), 0.0, 1e-12);
            let i2 = adaptive_semi_infinite(|b| b * b * phi(k * b), 0.0, 1e-12);
            assert!((i3 - 3.0 / (8.0 * k.powi(4))).abs() < 1e-8);
            assert!((i1 - 1.0 / (4.0 * k * k)).abs() < 1e-8);
            assert!((i2 - 1.0 / (2.0 * k.powi(3))).abs() < 1e-8);
        }
        assert!((adaptive(|x| x, 0.0, 2.0, 1e-12) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn affine_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = affine_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
        assert!(affine_fit(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn diagnostic_identity_and_errors() {
        let grid = default_grid(4);
        let same = exponentiality_diagnostic(1.0, 1.0, &grid).unwrap();
        assert!((same.fit.r_squared - 1.0).abs() < 1e-15);
        assert!(same.fit.max_residual < 1e-12);
        assert!(matches!(
            exponentiality_diagnostic(0.8, 1.25, &[(0.5, -0.5, 1.0); 5]),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(exponentiality_diagnostic(0.0, 1.25, &grid).is_err());
    }

    #[test]
    fn scale_normal_control_is_exact() {
        let ys: Vec<f64> = (1..200).map(|i| i as f64 * 0.02).collect();
        let c = scale_normal_control(0.8, 1.25, &ys).unwrap();
        assert!((c.fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn score_matches_scale_family_identity() {
        // ∫ score f = 0 pointwise is not checkable; instead compare the score
        // against the analytic form -3/(2θ) - x·∇f/(2θ f) at θ = 1.
        let (xi, a, b) = (0.6, -0.7, 1.4);
        let t = trunc();
        let f = |x: f64, y: f64, z: f64| joint_density_chl(x, y, z, &t).unwrap();
        let h = 1e-5;
        let grad_dot = xi * (f(xi + h, a, b) - f(xi - h, a, b)) / (2.0 * h)
            + a * (f(xi, a + h, b) - f(xi, a - h, b)) / (2.0 * h)
            + b * (f(xi, a, b + h) - f(xi, a, b - h)) / (2.0 * h);
        let analytic = -1.5 - 0.5 * grad_dot / f(xi, a, b);
        let s = score(xi, a, b, 1.0, &t);
        assert!((s - analytic).abs() < 1e-6, "{s} vs {analytic}");
    }
}
