use thiserror::Error;

/// Which side of the support an argument fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportSide {
    /// Below the lower endpoint, where the CDF is 0.
    Below,
    /// Above the upper endpoint, where the CDF is 1.
    Above,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument {x} lies outside the support ({side:?})")]
    OutsideSupport { x: f64, side: SupportSide },

    #[error("probability {0} is not strictly inside (0, 1)")]
    InvalidProbability(f64),

    #[error("energy must be positive, got {0}")]
    NonPositiveEnergy(f64),

    #[error("|gamma| = {gamma} exceeds gamma_th = {gamma_th}")]
    GammaOutOfRange { gamma: f64, gamma_th: f64 },

    #[error("record {id}: 1 + gamma*z = {margin} is not positive")]
    InfeasibleRecord { id: String, margin: f64 },

    #[error("C4 defines no quantile at tau = {0} (off the fitted grid)")]
    OffGrid(f64),

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("optimizer: {0}")]
    Optim(String),

    #[error("Fisher information not PD at optimum")]
    NotPositiveDefinite,

    #[error("estimate is on or near the boundary of the parameter space: {0}")]
    OnBoundary(String),

    #[error("schema error at row {row}, column {column}: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
