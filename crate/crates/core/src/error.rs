use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid candle: {0}")]
    InvalidCandle(String),

    #[error("window {index}: {source}")]
    InWindow {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },

    #[error("matrix is not symmetric: |S[{row}][{col}] - S[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("outside the density domain: {0}")]
    Domain(String),

    #[error("series truncation |j| <= {max_abs_j} leaves tail bound {tail_bound:e} above tolerance {tolerance:e}")]
    TruncationInsufficient {
        max_abs_j: usize,
        tail_bound: f64,
        tolerance: f64,
    },

    #[error("design matrix is rank deficient at column {column} ({name})")]
    RankDeficient { column: usize, name: String },

    #[error("invalid walk specification: {0}")]
    InvalidSpec(String),

    #[error("resolution too coarse: successive refinements gave {coarse} and {fine}")]
    ResolutionTooCoarse { coarse: f64, fine: f64 },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("replication {index}: {source}")]
    InReplication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn in_window(self, index: usize) -> Self {
        Error::InWindow {
            index,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
