use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} budget exceeded: needs {needed}, limit {limit}")]
    BudgetExceeded { what: &'static str, needed: u64, limit: u64 },
    #[error("depth {requested} exceeds resolution depth {available}")]
    DepthExceedsResolution { requested: u32, available: u32 },
    #[error("cube {0} is not in the hierarchy")]
    NotInHierarchy(String),
    #[error("the root cube has no parent")]
    ParentOfRoot,
    #[error("cube id parse error: {0}")]
    Parse(String),
    #[error("point lies in the unresolved shell")]
    Unresolved,
    #[error("point lies outside the domain box")]
    Outside,
    #[error("mis-calibrated region parameters: {0}")]
    MisCalibrated(String),
    #[error("cube {cube} is not contained in root {root}")]
    NotContained { cube: String, root: String },
    #[error("kernel support at the query point leaves the resolved region")]
    BallExitsResolved,
    #[error("boundary data is not supported in the root cube")]
    SupportOutsideRoot,
    #[error("empty test family")]
    EmptyFamily,
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("walk budget: censored fraction {0} is not below 1%")]
    Censored(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
