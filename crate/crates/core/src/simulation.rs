//! Simulated OHLC windows and `(C, H, L)` samplers.
//!
//! Randomness comes from ChaCha8 streams: stream `k` of a seed drives batch
//! `k` of [`BATCH`] consecutive windows. Batches are generated in parallel and
//! concatenated in index order, so output depends only on the seed.
//!
//! Random-walk windows take the extremes over the `N + 1` lattice points, which
//! understates the extremes of a continuous path. Where continuous Brownian
//! windows are needed, [`simulate_brownian`] refines each lattice step with an
//! exact draw of the Brownian-bridge maximum and minimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{flip, Candle, SpreadsS1, SpreadsS2};

/// Windows generated from one RNG stream.
pub const BATCH: usize = 1024;

/// Lattice steps per window for bridge-refined Brownian windows. Bridge
/// extremes are drawn independently per step, which is exact unless the
/// window's maximum and minimum fall in the same step (probability of order
/// `exp(-π √steps)`).
pub const BRIDGE_STEPS: usize = 64;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser; derives independent seeds for replications.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on (0, 1], safe under `ln`.
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum IncrementLaw {
    Gaussian { sigma: f64 },
    /// Raw Student-t variates (scale parameter 1).
    StudentT { df: f64 },
    /// Uniform with unit variance.
    Uniform,
    /// Laplace with unit variance.
    DoubleExponential,
}

enum Sampler {
    Gaussian(f64),
    StudentT(StudentT<f64>),
    Uniform,
    Laplace,
}

impl Sampler {
    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gaussian(sigma) => sigma * rng.sample::<f64, _>(StandardNormal),
            Sampler::StudentT(t) => t.sample(rng),
            Sampler::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
            Sampler::Laplace => {
                let e: f64 = rng.sample(Exp1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e / std::f64::consts::SQRT_2
            }
        }
    }
}

/// A random walk observed in windows of `increments_per_window` steps.
///
/// Each increment is the law's variate divided by `√N`, so a Gaussian window
/// has variance σ² whatever N is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub increments_per_window: usize,
    pub increment_law: IncrementLaw,
    pub windows: usize,
    pub seed: u64,
}

impl WalkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.increments_per_window == 0 {
            return Err(Error::InvalidSpec("increments_per_window must be >= 1".into()));
        }
        match self.increment_law {
            IncrementLaw::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidSpec(format!("sigma must be > 0, got {sigma}")))
            }
            IncrementLaw::StudentT { df } if !(df > 0.0 && df.is_finite()) => {
                Err(Error::InvalidSpec(format!("df must be > 0, got {df}")))
            }
            _ => Ok(()),
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match self.increment_law {
            IncrementLaw::Gaussian { sigma } => Sampler::Gaussian(sigma),
            IncrementLaw::StudentT { df } => Sampler::StudentT(
                StudentT::new(df).map_err(|e| Error::InvalidSpec(e.to_string()))?,
            ),
            IncrementLaw::Uniform => Sampler::Uniform,
            IncrementLaw::DoubleExponential => Sampler::Laplace,
        })
    }
}

fn walk_window(sampler: &Sampler, steps: usize, scale: f64, negate: bool, rng: &mut ChaCha8Rng) -> SpreadsS1 {
    let sign = if negate { -scale } else { scale };
    let (mut x, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        x += sign * sampler.draw(rng);
        hi = hi.max(x);
        lo = lo.min(x);
    }
    SpreadsS1::new(x, hi, lo)
}

fn batched<T: Send>(count: usize, seed: u64, per_window: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    let batches = count.div_ceil(BATCH);
    let parts: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let len = BATCH.min(count - b * BATCH);
            (0..len).map(|_| per_window(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Per-window spreads of the walk.
pub fn simulate_spreads(spec: &WalkSpec) -> Result<Vec<SpreadsS1>> {
    simulate_spreads_signed(spec, false)
}

/// As [`simulate_spreads`], with every increment's sign reversed when `negate` is set.
pub fn simulate_spreads_signed(spec: &WalkSpec, negate: bool) -> Result<Vec<SpreadsS1>> {
    let sampler = spec.sampler()?;
    let n = spec.increments_per_window;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(batched(spec.windows, spec.seed, |rng| walk_window(&sampler, n, scale, negate, rng)))
}

/// Consecutive candles of one walk: each window opens at the previous close,
/// the first at 0.
pub fn simulate_windows(spec: &WalkSpec) -> Result<Vec<Candle>> {
    let spreads = simulate_spreads(spec)?;
    Ok(candles_from_spreads(&spreads))
}

pub fn candles_from_spreads(spreads: &[SpreadsS1]) -> Vec<Candle> {
    let mut open = 0.0;
    spreads
        .iter()
        .map(|s| {
            let candle = Candle::new(open, open + s.h, open + s.l, open + s.c);
            open += s.c;
            candle
        })
        .collect()
}

/// One standard Brownian window on [0, 1]: a `steps`-point lattice whose
/// extremes are refined by exact Brownian-bridge draws within each step.
pub fn brownian_window(steps: usize, rng: &mut ChaCha8Rng) -> SpreadsS1 {
    let dt = 1.0 / steps as f64;
    let sd = dt.sqrt();
    let (mut x, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let next = x + sd * z;
        let gap = next - x;
        let mid = x + next;
        let up = (gap * gap - 2.0 * dt * open_unit(rng).ln()).sqrt();
        let down = (gap * gap - 2.0 * dt * open_unit(rng).ln()).sqrt();
        hi = hi.max(0.5 * (mid + up));
        lo = lo.min(0.5 * (mid - down));
        x = next;
    }
    SpreadsS1::new(x, hi, lo)
}

/// `windows` independent standard Brownian windows (σ = 1).
pub fn simulate_brownian(windows: usize, steps: usize, seed: u64) -> Vec<SpreadsS1> {
    assert!(steps >= 1);
    batched(windows, seed, |rng| brownian_window(steps, rng))
}

/// Draw `C = |Z|` and `H` from `2H(H - C) = E`, `E ~ Exp(1)` independent of `C`.
#[inline]
pub fn draw_close_high(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(Exp1);
    let c = z.abs();
    (c, close_high_from_exp(c, e))
}

/// The root `H >= C` of `2H(H - C) = e`.
#[inline]
pub fn close_high_from_exp(c: f64, e: f64) -> f64 {
    0.5 * (c + (c * c + 2.0 * e).sqrt())
}

/// Exact draws of `(C, H)` for a standard Brownian window.
pub fn sample_ch_exact(count: usize, seed: u64) -> Vec<(f64, f64)> {
    batched(count, seed, draw_close_high)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Copula {
    /// `L' = C' - H'` inside each subinterval.
    AntitheticDefault,
    /// `L' = C' - H''` with `H''` redrawn given `C'`.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Path,
    ExactPair,
    ApproxTriple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChlSample {
    pub spreads: SpreadsS2,
    pub provenance: Provenance,
}

fn approx_triple(subintervals: usize, copula: Copula, rng: &mut ChaCha8Rng) -> SpreadsS2 {
    let scale = 1.0 / (subintervals as f64).sqrt();
    let (mut x, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..subintervals {
        let (c, h) = draw_close_high(rng);
        let l = match copula {
            Copula::AntitheticDefault => c - h,
            Copula::Independent => {
                let e: f64 = rng.sample(Exp1);
                c - close_high_from_exp(c, e)
            }
        };
        // unflip the piece with a fair sign
        let piece = if rng.random::<bool>() {
            SpreadsS1::new(c, h, l)
        } else {
            SpreadsS1::new(-c, -l, -h)
        };
        hi = hi.max(x + scale * piece.h);
        lo = lo.min(x + scale * piece.l);
        x += scale * piece.c;
    }
    flip(SpreadsS1::new(x, hi, lo))
}

/// Approximate `(C, H, L)` triples built from `subintervals` exactly sampled
/// `(C', H')` pieces, each completed with the copula's choice of `L'`.
pub fn sample_chl_approx(count: usize, subintervals: usize, copula: Copula, seed: u64) -> Result<Vec<ChlSample>> {
    if subintervals == 0 {
        return Err(Error::InvalidSpec("subintervals must be >= 1".into()));
    }
    Ok(batched(count, seed, |rng| ChlSample {
        spreads: approx_triple(subintervals, copula, rng),
        provenance: Provenance::ApproxTriple,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, mean_estimate};

    fn gaussian(n: usize, windows: usize, seed: u64) -> WalkSpec {
        WalkSpec {
            increments_per_window: n,
            increment_law: IncrementLaw::Gaussian { sigma: 1.0 },
            windows,
            seed,
        }
    }

    #[test]
    fn one_step_walk_extremes() {
        for s in simulate_spreads(&gaussian(1, 500, 3)).unwrap() {
            assert_eq!(s.h, s.c.max(0.0));
            assert_eq!(s.l, s.c.min(0.0));
        }
    }

    #[test]
    fn candles_chain_and_validate() {
        let candles = simulate_windows(&gaussian(10, 3000, 9)).unwrap();
        assert_eq!(candles[0].open, 0.0);
        for pair in candles.windows(2) {
            assert_eq!(pair[1].open, pair[0].close);
        }
        assert!(candles.iter().all(|c| c.validate().is_ok()));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = simulate_spreads(&gaussian(20, 2500, 77)).unwrap();
        let b = simulate_spreads(&gaussian(20, 2500, 77)).unwrap();
        assert_eq!(a, b);
        let c = simulate_spreads(&gaussian(20, 2500, 78)).unwrap();
        assert_ne!(a, c);
        // prefix property: batches do not depend on the total count
        let d = simulate_spreads(&gaussian(20, 1500, 77)).unwrap();
        assert_eq!(&a[..1500], &d[..]);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = gaussian(8, 5000, 5);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| simulate_spreads(&spec).unwrap());
        let b = wide.install(|| simulate_spreads(&spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn negated_increments_mirror_the_window() {
        let spec = gaussian(12, 800, 21);
        let up = simulate_spreads_signed(&spec, false).unwrap();
        let down = simulate_spreads_signed(&spec, true).unwrap();
        for (u, d) in up.iter().zip(&down) {
            assert_eq!(*d, u.mirror());
            assert_eq!(flip(*u), flip(*d));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = gaussian(0, 10, 1);
        assert!(simulate_spreads(&spec).is_err());
        spec.increments_per_window = 5;
        spec.increment_law = IncrementLaw::StudentT { df: 0.0 };
        assert!(matches!(simulate_spreads(&spec), Err(Error::InvalidSpec(_))));
        spec.increment_law = IncrementLaw::Gaussian { sigma: -1.0 };
        assert!(simulate_windows(&spec).is_err());
    }

    #[test]
    fn unit_variance_laws() {
        for law in [IncrementLaw::Uniform, IncrementLaw::DoubleExponential] {
            let spec = WalkSpec {
                increments_per_window: 1,
                increment_law: law,
                windows: 200_000,
                seed: 4,
            };
            let c2: Vec<f64> = simulate_spreads(&spec).unwrap().iter().map(|s| s.c * s.c).collect();
            let est = mean_estimate(&c2);
            assert!(est.within(1.0, 4.0), "{law:?}: {est:?}");
        }
    }

    #[test]
    fn exact_pair_boundary() {
        assert_eq!(close_high_from_exp(0.7, 0.0), 0.7);
        let h = close_high_from_exp(0.4, 1.3);
        assert!((2.0 * h * (h - 0.4) - 1.3).abs() < 1e-14);
    }

    #[test]
    fn exact_pair_second_moment() {
        let pairs = sample_ch_exact(400_000, 8);
        let h2: Vec<f64> = pairs.iter().map(|(_, h)| h * h).collect();
        let ch: Vec<f64> = pairs.iter().map(|(c, h)| c * h).collect();
        assert!(mean_estimate(&h2).within(1.75, 4.0));
        assert!(mean_estimate(&ch).within(1.25, 4.0));
    }

    #[test]
    fn approx_triples_single_subinterval() {
        let s = sample_chl_approx(2000, 1, Copula::AntitheticDefault, 2).unwrap();
        for t in &s {
            let sp = t.spreads;
            assert!((sp.low - (sp.close - sp.high)).abs() < 1e-15);
            assert_eq!(t.provenance, Provenance::ApproxTriple);
        }
        assert!(sample_chl_approx(1, 0, Copula::Independent, 0).is_err());
    }

    #[test]
    fn approx_triples_converge() {
        let target = 1.0 - 2.0 * std::f64::consts::LN_2;
        let s = sample_chl_approx(100_000, 100, Copula::AntitheticDefault, 6).unwrap();
        let hl: Vec<f64> = s.iter().map(|t| t.spreads.high * t.spreads.low).collect();
        assert!((mean(&hl) - target).abs() < 0.01, "{}", mean(&hl));
        let s = sample_chl_approx(100_000, 100, Copula::Independent, 6).unwrap();
        let hl: Vec<f64> = s.iter().map(|t| t.spreads.high * t.spreads.low).collect();
        assert!((mean(&hl) - target).abs() < 0.01, "{}", mean(&hl));
    }

    #[test]
    fn lattice_high_is_biased_low_and_rises_with_n() {
        // continuous value: E[h] = sqrt(2/π)
        let target = (2.0 / std::f64::consts::PI).sqrt();
        let mut prev = 0.0;
        for n in [10, 100, 1000] {
            let s = simulate_spreads(&gaussian(n, 20_000, 31)).unwrap();
            let h: Vec<f64> = s.iter().map(|s| s.h).collect();
            let m = mean(&h);
            assert!(m < target, "n={n}: {m}");
            assert!(m > prev, "n={n}: {m} <= {prev}");
            prev = m;
        }
    }

    #[test]
    fn bridge_refined_windows_are_unbiased_for_the_high() {
        let target = (2.0 / std::f64::consts::PI).sqrt();
        let s = simulate_brownian(200_000, 16, 12);
        let h: Vec<f64> = s.iter().map(|s| s.h).collect();
        assert!(mean_estimate(&h).within(target, 4.0));
    }
}
