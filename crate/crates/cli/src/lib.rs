//! The `rangevol` command line.
//!
//! Every JSON result is wrapped as `{version, seed, config, result}` with
//! numbers rounded to 15 significant digits, so a result can be reproduced
//! from its own `seed` and `config`. Failures print
//! `{version, error: {kind, message}}` and exit nonzero.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rangevol::density::{self, FisherMethod, SeriesTruncation};
use rangevol::estimators::{estimate_series, EstimatorId};
use rangevol::io::{ingest_candles, write_candles};
use rangevol::moments::{covariance_matrix, delta_closed_forms, full_moment_table, seshadri_correlation};
use rangevol::oracle::{self, OracleCheck};
use rangevol::regression::{replicate_fit, table_campaign, QuadraticBasis};
use rangevol::simulation::{candles_from_spreads, simulate_brownian, simulate_windows, IncrementLaw, WalkSpec, BRIDGE_STEPS};
use rangevol::stats::mean_estimate;
use rangevol::types::{flip, SpreadsS2};
use rangevol::weights::solve_optimal_weights;
use rangevol::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "rangevol", version, about = "Range-based variance estimation for OHLC windows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the per-window variance of a candle file
    Estimate(EstimateArgs),
    /// Simulate a walk and emit its candles as CSV
    Simulate(SimulateArgs),
    /// Closed-form moment table, optionally against simulation
    Moments(MomentsArgs),
    /// Minimum-variance weights for the four basic estimators
    Weights(WeightsArgs),
    /// Fit a calibrated quadratic estimator on simulated windows
    Fit(FitArgs),
    /// Run the variance/coefficient tables over a df x N grid
    Campaign(CampaignArgs),
    /// Evaluate the strip probability density or the joint (c, h, l) density
    Density(DensityArgs),
    /// Fisher information for the variance of a Brownian window
    Fisher(FisherArgs),
    /// Check whether the trivariate law is an exponential family
    Expcheck(ExpcheckArgs),
    /// Run the closed-form and simulation checks
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Gaussian,
    T,
    Uniform,
    Laplace,
    /// Continuous Brownian motion (bridge-refined extremes)
    Brownian,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub law: Law,
    /// Degrees of freedom for `--law t`
    #[arg(long, default_value_t = 3.0)]
    pub df: f64,
    #[arg(long, default_value_t = 50)]
    pub n_increments: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl WalkArgs {
    fn spec(&self, windows: usize) -> Result<WalkSpec, Error> {
        let increment_law = match self.law {
            Law::Gaussian => IncrementLaw::Gaussian { sigma: 1.0 },
            Law::T => IncrementLaw::StudentT { df: self.df },
            Law::Uniform => IncrementLaw::Uniform,
            Law::Laplace => IncrementLaw::DoubleExponential,
            Law::Brownian => return Err(Error::InvalidSpec("brownian is not a random-walk law".into())),
        };
        Ok(WalkSpec {
            increments_per_window: self.n_increments,
            increment_law,
            windows,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// classical, gk, proposed, basis1..basis4, pairwise-mle, or all
    #[arg(long, default_value = "all")]
    pub method: String,
    /// Take natural logs of prices first
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    #[arg(long, default_value_t = 1000)]
    pub windows: usize,
    /// Lattice steps per window for `--law brownian`
    #[arg(long, default_value_t = BRIDGE_STEPS)]
    pub steps: usize,
    /// Write the CSV here and print a JSON summary; otherwise CSV goes to stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    /// Also estimate every moment from this many simulated windows
    #[arg(long, default_value_t = 0)]
    pub mc_windows: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightsArgs {
    /// JSON file holding a square covariance matrix (array of rows); defaults
    /// to the closed-form 4x4 matrix
    #[arg(long)]
    pub sigma: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value = "s2")]
    pub basis: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    #[arg(long, default_value_t = 100_000)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    /// Include per-replication coefficients and variances
    #[arg(long)]
    pub detail: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CampaignArgs {
    /// Comma-separated df values; `inf` means Gaussian increments
    #[arg(long, default_value = "1.5,2,2.5,3,3.5,4,4.5,5,inf")]
    pub dfs: String,
    #[arg(long, default_value = "10,30,50")]
    pub ns: String,
    #[arg(long, default_value_t = 100_000)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for table1.csv, table2.csv and campaign.json
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    /// Q(xi, a, b)
    Q,
    /// Joint density of (c, l, h) at (xi, a, b)
    Chl,
    /// Joint density of (C, H, L) at (C = xi, L = a, H = b)
    S2,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long, value_enum, default_value = "chl")]
    pub kind: DensityKind,
    #[arg(long, allow_hyphen_values = true)]
    pub xi: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 16)]
    pub max_j: usize,
    #[arg(long, default_value_t = 1e-14)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FisherMethodArg {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FisherArgs {
    #[arg(long, value_enum, default_value = "quadrature")]
    pub method: FisherMethodArg,
    /// Panels per axis (quadrature) or windows (Monte Carlo)
    #[arg(long, default_value_t = 12)]
    pub resolution: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExpcheckArgs {
    #[arg(long, default_value_t = 0.8)]
    pub theta1: f64,
    #[arg(long, default_value_t = 1.25)]
    pub theta2: f64,
    /// Points per axis of the regular grid
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Simulated Brownian windows for the moment and Seshadri checks
    #[arg(long, default_value_t = 1_000_000)]
    pub windows: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo tolerance in standard errors
    #[arg(long, default_value_t = 4.0)]
    pub n_se: f64,
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Round every float to 15 significant digits.
pub fn round_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
            serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

fn envelope(seed: Option<u64>, config: &impl Serialize, result: Value) -> Value {
    round_numbers(json!({
        "version": VERSION,
        "seed": seed,
        "config": config,
        "result": result,
    }))
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidCandle(_) => "invalid_candle",
        Error::InWindow { .. } => "invalid_window",
        Error::EmptyInput => "empty_input",
        Error::WeightsNotNormalized { .. } => "weights_not_normalized",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::Dimension(_) => "dimension",
        Error::Domain(_) => "domain",
        Error::TruncationInsufficient { .. } => "truncation_insufficient",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::InvalidSpec(_) => "invalid_spec",
        Error::ResolutionTooCoarse { .. } => "resolution_too_coarse",
        Error::DegenerateGrid(_) => "degenerate_grid",
        Error::UnknownEstimator(_) => "unknown_estimator",
        Error::Parse { .. } => "parse",
        Error::InReplication { .. } => "replication",
        Error::Io(_) => "io",
    }
}

fn to_value(x: &impl Serialize) -> Value {
    serde_json::to_value(x).expect("result types serialise")
}

fn checks_value(checks: &[OracleCheck]) -> Value {
    json!({ "passed": oracle::all_passed(checks), "checks": checks })
}

/// A successful command: its JSON (or CSV) text and whether every check passed.
struct Done {
    text: String,
    ok: bool,
}

fn json_done(v: Value) -> Done {
    Done {
        text: serde_json::to_string_pretty(&v).expect("json") + "\n",
        ok: true,
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::InvalidSpec(format!("bad {what} `{t}`"))))
        .collect()
}

fn parse_dfs(s: &str) -> Result<Vec<Option<f64>>, Error> {
    s.split(',')
        .map(|t| match t.trim() {
            "inf" | "∞" | "gaussian" => Ok(None),
            v => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::InvalidSpec(format!("bad df `{v}`"))),
        })
        .collect()
}

fn brownian_s2(windows: usize, seed: u64) -> Vec<SpreadsS2> {
    simulate_brownian(windows, BRIDGE_STEPS, seed).into_iter().map(flip).collect()
}

fn execute(cmd: &Command) -> Result<Done, Error> {
    match cmd {
        Command::Estimate(a) => {
            let file = ingest_candles(&a.input, a.log)?;
            if file.candles.is_empty() {
                return Err(Error::EmptyInput);
            }
            let methods: Vec<EstimatorId> = if a.method == "all" {
                EstimatorId::ALL.to_vec()
            } else {
                parse_list(&a.method, "estimator").map_err(|_| Error::UnknownEstimator(a.method.clone()))?
            };
            let mut rows = Vec::new();
            for m in methods {
                let est = estimate_series(&file.candles, m)?;
                let se = mean_estimate(&est.per_window).std_error;
                rows.push(json!({ "method": m.as_str(), "mean": est.mean, "std_error": se }));
            }
            Ok(json_done(envelope(
                None,
                a,
                json!({ "windows": file.candles.len(), "warnings": file.warnings, "estimates": rows }),
            )))
        }
        Command::Simulate(a) => {
            let candles = if a.walk.law == Law::Brownian {
                if a.steps == 0 {
                    return Err(Error::InvalidSpec("steps must be >= 1".into()));
                }
                candles_from_spreads(&simulate_brownian(a.windows, a.steps, a.walk.seed))
            } else {
                simulate_windows(&a.walk.spec(a.windows)?)?
            };
            match &a.output {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    write_candles(std::io::BufWriter::new(file), &candles, 0, 1)?;
                    Ok(json_done(envelope(
                        Some(a.walk.seed),
                        a,
                        json!({ "windows": candles.len(), "output": path }),
                    )))
                }
                None => {
                    let mut buf = Vec::new();
                    write_candles(&mut buf, &candles, 0, 1)?;
                    Ok(Done {
                        text: String::from_utf8(buf).expect("csv is utf-8"),
                        ok: true,
                    })
                }
            }
        }
        Command::Moments(a) => {
            let table = full_moment_table();
            let mut result = json!({
                "moments": table.iter().map(|(k, v)| (k.name().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "delta_closed_forms": delta_closed_forms().into_iter().map(|(k, v)| (k.name().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "seshadri_correlation": seshadri_correlation(),
                "covariance": covariance_matrix().to_rows(),
            });
            let mut ok = true;
            if a.mc_windows > 0 {
                let checks = oracle::moment_checks(&brownian_s2(a.mc_windows, a.seed), 4.0);
                ok = oracle::all_passed(&checks);
                result["monte_carlo"] = checks_value(&checks);
            }
            let seed = (a.mc_windows > 0).then_some(a.seed);
            let mut done = json_done(envelope(seed, a, result));
            done.ok = ok;
            Ok(done)
        }
        Command::Weights(a) => {
            let sigma = match &a.sigma {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<Vec<Vec<f64>>>(&text)
                        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?
                }
                None => covariance_matrix().to_rows(),
            };
            let r = solve_optimal_weights(&sigma)?;
            Ok(json_done(envelope(None, a, to_value(&r))))
        }
        Command::Fit(a) => {
            let basis: QuadraticBasis = a.basis.parse()?;
            let mut r = replicate_fit(&a.walk.spec(a.sample_size)?, basis, a.replications)?;
            if !a.detail {
                r.per_replication_coefficients.clear();
            }
            Ok(json_done(envelope(Some(a.walk.seed), a, to_value(&r))))
        }
        Command::Campaign(a) => {
            let dfs = parse_dfs(&a.dfs)?;
            let ns: Vec<usize> = parse_list(&a.ns, "N")?;
            let c = table_campaign(&dfs, &ns, a.sample_size, a.replications, a.seed)?;
            let (t1, t2) = (c.table1_csv(), c.table2_csv());
            if let Some(dir) = &a.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("table1.csv"), &t1)?;
                std::fs::write(dir.join("table2.csv"), &t2)?;
                let full = envelope(Some(a.seed), a, to_value(&c));
                std::fs::write(dir.join("campaign.json"), serde_json::to_string_pretty(&full).expect("json"))?;
            }
            Ok(json_done(envelope(Some(a.seed), a, json!({ "table1_csv": t1, "table2_csv": t2 }))))
        }
        Command::Density(a) => {
            let trunc = SeriesTruncation {
                max_abs_j: a.max_j,
                tolerance: a.tolerance,
            };
            let result = match a.kind {
                DensityKind::Q => to_value(&density::siegmund_q(a.xi, a.a, a.b, &trunc)?),
                DensityKind::Chl => json!({ "value": density::joint_density_chl(a.xi, a.a, a.b, &trunc)? }),
                DensityKind::S2 => json!({ "value": density::joint_density_s2(a.xi, a.b, a.a, &trunc)? }),
            };
            Ok(json_done(envelope(None, a, result)))
        }
        Command::Fisher(a) => {
            let method = match a.method {
                FisherMethodArg::Quadrature => FisherMethod::Quadrature,
                FisherMethodArg::MonteCarlo => FisherMethod::MonteCarlo,
            };
            let r = density::fisher_information(method, a.resolution)?;
            Ok(json_done(envelope(None, a, to_value(&r))))
        }
        Command::Expcheck(a) => {
            let grid = density::default_grid(a.grid);
            let d = density::exponentiality_diagnostic(a.theta1, a.theta2, &grid)?;
            let closes: Vec<f64> = grid.iter().map(|g| g.0).collect();
            let control = density::scale_normal_control(a.theta1, a.theta2, &closes)?;
            Ok(json_done(envelope(None, a, json!({ "trivariate": d, "scale_normal_control": control }))))
        }
        Command::Verify(a) => {
            let s1 = simulate_brownian(a.windows, BRIDGE_STEPS, a.seed);
            let s2: Vec<SpreadsS2> = s1.iter().map(|s| flip(*s)).collect();
            let sections = [
                ("covariance", oracle::sigma_checks(1e-5)),
                ("weights", oracle::weight_checks(1e-5)),
                ("gk_reconstruction", vec![oracle::gk_reconstruction_check(0.002)]),
                ("moments", oracle::moment_checks(&s2, a.n_se)),
                ("seshadri", oracle::seshadri_checks(&s2, 0.01, a.n_se)),
            ];
            let ok = sections.iter().all(|(_, c)| oracle::all_passed(c));
            let result: serde_json::Map<String, Value> =
                sections.iter().map(|(name, c)| (name.to_string(), checks_value(c))).collect();
            let mut done = json_done(envelope(Some(a.seed), a, json!({ "passed": ok, "sections": result })));
            done.ok = ok;
            Ok(done)
        }
    }
}

/// Parse `argv` (including the program name) and run the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match execute(&cli.command) {
        Ok(done) => Outcome {
            code: if done.ok { 0 } else { 1 },
            stdout: done.text,
            stderr: String::new(),
        },
        Err(e) => {
            let body = json!({
                "version": VERSION,
                "error": { "kind": error_kind(&e), "message": e.to_string() },
            });
            Outcome {
                code: 1,
                stdout: String::new(),
                stderr: serde_json::to_string_pretty(&body).expect("json") + "\n",
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        let v = round_numbers(json!({ "x": 0.1 + 0.2, "n": 3, "xs": [1.0 / 3.0] }));
        assert_eq!(v["x"], json!(0.3));
        assert_eq!(v["n"], json!(3));
        assert_eq!(v["xs"][0], json!(0.333333333333333));
    }

    #[test]
    fn df_lists() {
        assert_eq!(parse_dfs("1.5, inf").unwrap(), vec![Some(1.5), None]);
        assert!(parse_dfs("x").is_err());
        assert_eq!(parse_list::<usize>("10,30", "N").unwrap(), vec![10, 30]);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let out = run(["rangevol", "frobnicate"]);
        assert_eq!(out.code, 2);
        assert!(out.stderr.contains("Usage"));
    }
}
