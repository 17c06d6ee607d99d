//! Minimum-variance mean-1 quadratic functions of window spreads, fitted by
//! regression on simulated walks.
//!
//! The constant 1 is regressed on the basis columns with no intercept, and the
//! fitted predictor is rescaled to have sample mean exactly 1. By
//! Sherman–Morrison the least-squares solution `(XᵀX)⁻¹Xᵀ1` is proportional
//! to `S⁻¹x̄` (`S` the sample covariance of the columns, `x̄` their means), so
//! after rescaling it is the exact minimiser of the sample variance subject to
//! mean 1. [`fit_constrained`] computes that minimiser directly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::basic_estimators;
use crate::linalg::StreamingQr;
use crate::simulation::{derive_seed, simulate_spreads, IncrementLaw, WalkSpec};
use crate::stats::{mean, median, pairwise_sum, variance};
use crate::types::{flip, Candle, SpreadsS1};
use crate::weights::solve_mean_constrained;

/// Relative size of an `R` diagonal below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadraticBasis {
    /// The six monomials `c², h², l², ch, cl, hl`.
    S1,
    /// The four basic estimators built from `(C, H, L)`.
    S2,
}

impl QuadraticBasis {
    pub fn len(&self) -> usize {
        self.names().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            QuadraticBasis::S1 => &["c^2", "h^2", "l^2", "ch", "cl", "hl"],
            QuadraticBasis::S2 => &[
                "2((H-C)^2+L^2)",
                "C^2",
                "2(H-C-L)C",
                "-(H-C)L/(2log2-5/4)",
            ],
        }
    }

    /// The basis row for one window.
    pub fn row(&self, s: SpreadsS1) -> Vec<f64> {
        match self {
            QuadraticBasis::S1 => vec![s.c * s.c, s.h * s.h, s.l * s.l, s.c * s.h, s.c * s.l, s.h * s.l],
            QuadraticBasis::S2 => basic_estimators(flip(s)).as_array().to_vec(),
        }
    }
}

impl std::str::FromStr for QuadraticBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(QuadraticBasis::S1),
            "s2" => Ok(QuadraticBasis::S2),
            other => Err(Error::InvalidSpec(format!("unknown basis `{other}`, expected s1 or s2"))),
        }
    }
}

impl std::fmt::Display for QuadraticBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuadraticBasis::S1 => "s1",
            QuadraticBasis::S2 => "s2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub basis: QuadraticBasis,
    pub terms: Vec<String>,
    /// Averaged over replications.
    pub coefficients: Vec<f64>,
    /// Averaged over replications.
    pub variance: f64,
    pub median_variance: f64,
    pub replications: usize,
    pub per_replication_variances: Vec<f64>,
    pub per_replication_coefficients: Vec<Vec<f64>>,
}

impl FitResult {
    fn from_replications(basis: QuadraticBasis, fits: Vec<(Vec<f64>, f64)>) -> Self {
        let r = fits.len();
        let p = basis.len();
        let coefficients = (0..p)
            .map(|k| pairwise_sum(&fits.iter().map(|f| f.0[k]).collect::<Vec<_>>()) / r as f64)
            .collect();
        let variances: Vec<f64> = fits.iter().map(|f| f.1).collect();
        Self {
            basis,
            terms: basis.names().iter().map(|s| s.to_string()).collect(),
            coefficients,
            variance: mean(&variances),
            median_variance: median(&variances),
            replications: r,
            per_replication_variances: variances,
            per_replication_coefficients: fits.into_iter().map(|f| f.0).collect(),
        }
    }
}

/// Sample mean and (n-1) variance of `Xβ`.
fn predictor_moments(rows: &[Vec<f64>], beta: &[f64]) -> (f64, f64) {
    let pred: Vec<f64> = rows.iter().map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    (mean(&pred), variance(&pred))
}

/// Calibrated least-squares fit on one sample: `(coefficients, variance)`.
pub fn fit_rows(rows: &[Vec<f64>], names: &[&str]) -> Result<(Vec<f64>, f64)> {
    let p = names.len();
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows.len() <= p {
        return Err(Error::Dimension(format!("need more than {p} windows, got {}", rows.len())));
    }
    let mut qr = StreamingQr::new(p);
    for x in rows {
        qr.push(x, 1.0);
    }
    let beta = qr.solve(RANK_TOL).map_err(|column| Error::RankDeficient {
        column,
        name: names[column].to_string(),
    })?;
    let (m, _) = predictor_moments(rows, &beta);
    let beta: Vec<f64> = beta.iter().map(|b| b / m).collect();
    let (_, v) = predictor_moments(rows, &beta);
    Ok((beta, v))
}

fn rows_of(spreads: &[SpreadsS1], basis: QuadraticBasis) -> Vec<Vec<f64>> {
    spreads.iter().map(|s| basis.row(*s)).collect()
}

/// Fit on precomputed spreads (a single replication).
pub fn fit_spreads(spreads: &[SpreadsS1], basis: QuadraticBasis) -> Result<FitResult> {
    let fit = fit_rows(&rows_of(spreads, basis), basis.names())?;
    Ok(FitResult::from_replications(basis, vec![fit]))
}

pub fn fit_quadratic(windows: &[Candle], basis: QuadraticBasis) -> Result<FitResult> {
    let spreads = windows
        .iter()
        .enumerate()
        .map(|(i, w)| w.spreads().map_err(|e| e.in_window(i)))
        .collect::<Result<Vec<_>>>()?;
    fit_spreads(&spreads, basis)
}

/// The mean-1 minimiser of sample variance, solved from the sample
/// covariance of the basis columns.
pub fn fit_constrained(spreads: &[SpreadsS1], basis: QuadraticBasis) -> Result<(Vec<f64>, f64)> {
    let rows = rows_of(spreads, basis);
    if rows.len() <= basis.len() {
        return Err(Error::Dimension(format!("need more than {} windows", basis.len())));
    }
    let p = basis.len();
    let columns: Vec<Vec<f64>> = (0..p).map(|k| rows.iter().map(|x| x[k]).collect()).collect();
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let cov: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let prods: Vec<f64> = columns[i]
                        .iter()
                        .zip(&columns[j])
                        .map(|(a, b)| (a - means[i]) * (b - means[j]))
                        .collect();
                    pairwise_sum(&prods) / (rows.len() - 1) as f64
                })
                .collect()
        })
        .collect();
    let sol = solve_mean_constrained(&cov, &means)?;
    let (_, v) = predictor_moments(&rows, &sol.weights);
    Ok((sol.weights, v))
}

fn replication_spec(spec: &WalkSpec, r: usize) -> WalkSpec {
    WalkSpec {
        seed: derive_seed(spec.seed, r as u64),
        ..*spec
    }
}

/// Fit every basis in `bases` on the same simulated sample for each of `r`
/// replications; replication `i` uses seed `derive_seed(spec.seed, i)`.
pub fn replicate_fits(spec: &WalkSpec, bases: &[QuadraticBasis], replications: usize) -> Result<Vec<FitResult>> {
    if replications == 0 {
        return Err(Error::InvalidSpec("replications must be >= 1".into()));
    }
    spec.validate()?;
    let per_rep: Vec<Vec<(Vec<f64>, f64)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let spreads = simulate_spreads(&replication_spec(spec, r))?;
            bases
                .iter()
                .map(|b| fit_rows(&rows_of(&spreads, *b), b.names()))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::InReplication {
                    index: r,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(bases
        .iter()
        .enumerate()
        .map(|(k, b)| FitResult::from_replications(*b, per_rep.iter().map(|fits| fits[k].clone()).collect()))
        .collect())
}

pub fn replicate_fit(spec: &WalkSpec, basis: QuadraticBasis, replications: usize) -> Result<FitResult> {
    Ok(replicate_fits(spec, &[basis], replications)?.remove(0))
}

/// One `(law, N)` cell of the campaign, both bases fitted on shared data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignCell {
    /// `None` for Gaussian increments.
    pub df: Option<f64>,
    pub increments_per_window: usize,
    pub s2: FitResult,
    pub s1: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Campaign {
    pub dfs: Vec<Option<f64>>,
    pub ns: Vec<usize>,
    pub sample_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub cells: Vec<CampaignCell>,
}

fn df_label(df: Option<f64>) -> String {
    match df {
        Some(d) => format!("{d:.1}"),
        None => "inf".into(),
    }
}

impl Campaign {
    pub fn cell(&self, df: Option<f64>, n: usize) -> Option<&CampaignCell> {
        self.cells.iter().find(|c| c.df == df && c.increments_per_window == n)
    }

    /// Averaged variances: one row per law, `S2` and `S1` columns per N.
    pub fn table1_csv(&self) -> String {
        let mut out = String::from("df");
        for n in &self.ns {
            out.push_str(&format!(",{n}_s2,{n}_s1"));
        }
        out.push('\n');
        for &df in &self.dfs {
            out.push_str(&df_label(df));
            for &n in &self.ns {
                let c = self.cell(df, n).expect("campaign cell");
                out.push_str(&format!(",{:.4},{:.4}", c.s2.variance, c.s1.variance));
            }
            out.push('\n');
        }
        out
    }

    /// Averaged S2 coefficients at the largest N in the campaign.
    pub fn table2_csv(&self) -> String {
        let n = *self.ns.iter().max().expect("non-empty N grid");
        let mut out = format!("df,{}\n", QuadraticBasis::S2.names().join(","));
        for &df in &self.dfs {
            let c = self.cell(df, n).expect("campaign cell");
            out.push_str(&df_label(df));
            for v in &c.s2.coefficients {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Run the Table 1/2 grid. `dfs` entries of `None` mean Gaussian increments.
/// Cell `k` (law-major order) seeds its replications from `derive_seed(seed, k)`.
pub fn table_campaign(dfs: &[Option<f64>], ns: &[usize], sample_size: usize, replications: usize, seed: u64) -> Result<Campaign> {
    if dfs.is_empty() || ns.is_empty() {
        return Err(Error::InvalidSpec("empty df or N grid".into()));
    }
    let mut cells = Vec::with_capacity(dfs.len() * ns.len());
    for (i, &df) in dfs.iter().enumerate() {
        for (j, &n) in ns.iter().enumerate() {
            let spec = WalkSpec {
                increments_per_window: n,
                increment_law: match df {
                    Some(df) => IncrementLaw::StudentT { df },
                    None => IncrementLaw::Gaussian { sigma: 1.0 },
                },
                windows: sample_size,
                seed: derive_seed(seed, (i * ns.len() + j) as u64),
            };
            let mut fits = replicate_fits(&spec, &[QuadraticBasis::S2, QuadraticBasis::S1], replications)?;
            let s1 = fits.pop().expect("two bases");
            let s2 = fits.pop().expect("two bases");
            cells.push(CampaignCell {
                df,
                increments_per_window: n,
                s2,
                s1,
            });
        }
    }
    Ok(Campaign {
        dfs: dfs.to_vec(),
        ns: ns.to_vec(),
        sample_size,
        replications,
        seed,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::simulate_brownian;

    fn gaussian(n: usize, windows: usize, seed: u64) -> WalkSpec {
        WalkSpec {
            increments_per_window: n,
            increment_law: IncrementLaw::Gaussian { sigma: 1.0 },
            windows,
            seed,
        }
    }

    #[test]
    fn calibration_is_exact() {
        let spreads = simulate_spreads(&gaussian(20, 5000, 3)).unwrap();
        for basis in [QuadraticBasis::S1, QuadraticBasis::S2] {
            let fit = fit_spreads(&spreads, basis).unwrap();
            let (m, v) = predictor_moments(&rows_of(&spreads, basis), &fit.coefficients);
            assert!((m - 1.0).abs() < 1e-12);
            assert_eq!(v, fit.variance);
        }
    }

    #[test]
    fn single_term_reduces_to_calibrated_close() {
        let spreads = simulate_brownian(20_000, 32, 5);
        let rows: Vec<Vec<f64>> = spreads.iter().map(|s| vec![s.c * s.c]).collect();
        let (beta, v) = fit_rows(&rows, &["C^2"]).unwrap();
        let c2: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let m = mean(&c2);
        assert!((beta[0] - 1.0 / m).abs() < 1e-12 / m);
        assert!((v - variance(&c2) / (m * m)).abs() < 1e-10);
        assert!((v - 2.0).abs() < 0.15);
    }

    #[test]
    fn least_squares_matches_constrained_solve() {
        let spreads = simulate_spreads(&gaussian(30, 20_000, 9)).unwrap();
        for basis in [QuadraticBasis::S1, QuadraticBasis::S2] {
            let fit = fit_spreads(&spreads, basis).unwrap();
            let (beta, v) = fit_constrained(&spreads, basis).unwrap();
            for (a, b) in fit.coefficients.iter().zip(&beta) {
                assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
            }
            assert!((fit.variance - v).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbations_never_lower_variance() {
        let spreads = simulate_spreads(&gaussian(10, 10_000, 11)).unwrap();
        for basis in [QuadraticBasis::S1, QuadraticBasis::S2] {
            let rows = rows_of(&spreads, basis);
            let fit = fit_spreads(&spreads, basis).unwrap();
            for k in 0..basis.len() {
                for f in [0.99, 1.01] {
                    let mut beta = fit.coefficients.clone();
                    beta[k] *= f;
                    let (m, _) = predictor_moments(&rows, &beta);
                    let beta: Vec<f64> = beta.iter().map(|b| b / m).collect();
                    let (_, v) = predictor_moments(&rows, &beta);
                    assert!(v >= fit.variance * (1.0 - 1e-12), "{basis} term {k}");
                }
            }
        }
    }

    #[test]
    fn one_replication_is_one_fit() {
        let spec = gaussian(10, 3000, 21);
        let rep = replicate_fit(&spec, QuadraticBasis::S2, 1).unwrap();
        let single = fit_spreads(&simulate_spreads(&replication_spec(&spec, 0)).unwrap(), QuadraticBasis::S2).unwrap();
        assert_eq!(rep.coefficients, single.coefficients);
        assert_eq!(rep.variance.to_bits(), single.variance.to_bits());
    }

    #[test]
    fn rank_deficiency_names_the_column() {
        // one-step walks: h = max(c, 0), l = min(c, 0), so hl = 0 throughout
        let spreads = simulate_spreads(&gaussian(1, 500, 1)).unwrap();
        match fit_spreads(&spreads, QuadraticBasis::S1) {
            Err(Error::RankDeficient { name, .. }) => assert!(["h^2", "l^2", "ch", "cl", "hl"].contains(&name.as_str())),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(matches!(fit_spreads(&[], QuadraticBasis::S2), Err(Error::EmptyInput)));
        assert!(replicate_fit(&gaussian(5, 100, 1), QuadraticBasis::S2, 0).is_err());
    }

    #[test]
    fn errors_carry_replication_index() {
        let spec = gaussian(1, 200, 2);
        match replicate_fit(&spec, QuadraticBasis::S1, 2) {
            Err(Error::InReplication { index, .. }) => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn campaign_tables_have_paper_layout() {
        let c = table_campaign(&[Some(4.0), None], &[5, 10], 2000, 2, 7).unwrap();
        let t1 = c.table1_csv();
        let lines: Vec<&str> = t1.lines().collect();
        assert_eq!(lines[0], "df,5_s2,5_s1,10_s2,10_s1");
        assert!(lines[1].starts_with("4.0,") && lines[2].starts_with("inf,"));
        assert_eq!(lines[1].split(',').nth(1).unwrap().split('.').nth(1).unwrap().len(), 4);
        let t2 = c.table2_csv();
        assert_eq!(t2.lines().count(), 3);
        assert!(t2.starts_with("df,2((H-C)^2+L^2),C^2,"));
    }
}
