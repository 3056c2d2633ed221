use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative radius {0} rejected")]
    NegativeRadius(i64),
    #[error("malformed signed permutation: {0}")]
    BadPermutation(String),
    #[error("probability parameter {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("requested {requested} walk steps, horizon is {horizon}")]
    HorizonExceeded { requested: u64, horizon: u64 },
    #[error("site {0} outside window of radius {1}")]
    OutsideWindow(String, u32),
    #[error("source site is unoccupied")]
    UnoccupiedSource,
    #[error("window of radius {radius} in dimension {dimension} is too large to index")]
    InfeasibleWindow { radius: u32, dimension: usize },
    #[error("target set is empty within the window")]
    EmptyTargetSet,
    #[error("geodesic structure requested on a censored result")]
    CensoredResult,
    #[error("enumeration budget exceeded: requires {required} joint prefixes, cap is {cap}")]
    BudgetExceeded { required: f64, cap: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("all {0} replicates were censored")]
    AllCensored(u64),
    #[error("window radius {window} too small for time bound {needed}")]
    WindowTooSmall { window: u32, needed: u64 },
    #[error("empty point set rejected")]
    EmptyPointSet,
}
