//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; the page parses it and draws on a
//! canvas. The same functions are plain Rust underneath (`*_json`), so they
//! are tested natively.

use serde_json::json;
use wasm_bindgen::prelude::*;

use rangevol::density::{joint_density_chl, siegmund_q, SeriesTruncation};
use rangevol::estimators::EstimatorId;
use rangevol::moments::covariance_matrix;
use rangevol::regression::{replicate_fit, QuadraticBasis};
use rangevol::simulation::{simulate_brownian, simulate_spreads, IncrementLaw, WalkSpec, BRIDGE_STEPS};
use rangevol::stats::{mean, variance};
use rangevol::weights::solve_optimal_weights;

/// Theoretical variances at σ = 1 for the Brownian case.
const THEORY: [(EstimatorId, f64); 4] = [
    (EstimatorId::Classical, 2.0),
    (EstimatorId::PairwiseMle, 0.369338),
    (EstimatorId::GarmanKlass, 0.268642),
    (EstimatorId::Proposed, 0.258658),
];

const MAX_WINDOWS: usize = 200_000;

fn walk(df: f64, n_increments: usize, windows: usize, seed: u64) -> Result<Vec<rangevol::SpreadsS1>, String> {
    if windows < 2 || windows > MAX_WINDOWS {
        return Err(format!("windows must be in 2..={MAX_WINDOWS}"));
    }
    if df <= 0.0 {
        // non-positive df selects continuous Brownian motion
        return Ok(simulate_brownian(windows, BRIDGE_STEPS, seed));
    }
    let law = if df.is_infinite() {
        IncrementLaw::Gaussian { sigma: 1.0 }
    } else {
        IncrementLaw::StudentT { df }
    };
    simulate_spreads(&WalkSpec {
        increments_per_window: n_increments,
        increment_law: law,
        windows,
        seed,
    })
    .map_err(|e| e.to_string())
}

/// Mean and variance of four estimators on simulated windows, with a
/// histogram of each (40 bins over [0, 4]).
pub fn compare_estimators_json(df: f64, n_increments: usize, windows: usize, seed: u64) -> Result<String, String> {
    let spreads = walk(df, n_increments, windows, seed)?;
    let bins = 40;
    let rows: Vec<_> = THEORY
        .iter()
        .map(|&(id, theory)| {
            let xs: Vec<f64> = spreads.iter().map(|s| id.apply(*s)).collect();
            let mut hist = vec![0usize; bins];
            for x in &xs {
                let k = (x / 4.0 * bins as f64).floor();
                if (0.0..bins as f64).contains(&k) {
                    hist[k as usize] += 1;
                }
            }
            json!({
                "method": id.as_str(),
                "mean": mean(&xs),
                "variance": variance(&xs),
                "brownian_variance": theory,
                "histogram": hist,
            })
        })
        .collect();
    Ok(json!({ "windows": windows, "estimators": rows }).to_string())
}

/// `f(ξ, a, b)` and `Q(ξ, a, b)` at `points` values of ξ across `(a, b)`.
pub fn density_slice_json(a: f64, b: f64, points: usize) -> Result<String, String> {
    if !(a < 0.0 && b > 0.0) {
        return Err("need a < 0 < b".into());
    }
    let points = points.clamp(3, 2000);
    let t = SeriesTruncation::default();
    let mut xs = Vec::with_capacity(points);
    let mut f = Vec::with_capacity(points);
    let mut q = Vec::with_capacity(points);
    for i in 0..points {
        let xi = a + (b - a) * (i as f64 + 0.5) / points as f64;
        xs.push(xi);
        f.push(joint_density_chl(xi, a, b, &t).map_err(|e| e.to_string())?);
        q.push(siegmund_q(xi, a, b, &t).map_err(|e| e.to_string())?.value);
    }
    Ok(json!({ "xi": xs, "density": f, "q": q }).to_string())
}

/// Closed-form optimal weights next to weights fitted by regression on a
/// simulated walk (S2 basis).
pub fn weights_json(df: f64, n_increments: usize, windows: usize, replications: usize, seed: u64) -> Result<String, String> {
    let exact = solve_optimal_weights(&covariance_matrix().to_rows()).map_err(|e| e.to_string())?;
    if windows > MAX_WINDOWS || replications == 0 || replications > 20 {
        return Err(format!("need windows <= {MAX_WINDOWS} and 1..=20 replications"));
    }
    let law = if df.is_infinite() || df <= 0.0 {
        IncrementLaw::Gaussian { sigma: 1.0 }
    } else {
        IncrementLaw::StudentT { df }
    };
    let spec = WalkSpec {
        increments_per_window: n_increments,
        increment_law: law,
        windows,
        seed,
    };
    let fit = replicate_fit(&spec, QuadraticBasis::S2, replications).map_err(|e| e.to_string())?;
    Ok(json!({
        "terms": fit.terms,
        "brownian": { "weights": exact.weights, "variance": exact.variance },
        "fitted": { "coefficients": fit.coefficients, "variance": fit.variance },
    })
    .to_string())
}

#[wasm_bindgen]
pub fn compare_estimators(df: f64, n_increments: usize, windows: usize, seed: u32) -> Result<String, JsValue> {
    compare_estimators_json(df, n_increments, windows, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn density_slice(a: f64, b: f64, points: usize) -> Result<String, JsValue> {
    density_slice_json(a, b, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fitted_weights(df: f64, n_increments: usize, windows: usize, replications: usize, seed: u32) -> Result<String, JsValue> {
    weights_json(df, n_increments, windows, replications, seed as u64).map_err(|e| JsValue::from_str(&e))
}
