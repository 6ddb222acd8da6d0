use thiserror::Error;

/// Errors raised while building, fitting, or pricing the storm model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("duplicate location identifier `{0}`")]
    DuplicateLocation(String),
    #[error("self-loop on location `{0}`")]
    SelfLoop(String),
    #[error("graph has no locations")]
    EmptyGraph,
    #[error("graph has {size} locations, above the enumeration cap of {cap}")]
    EnumerationCap { size: usize, cap: usize },
    #[error("index {index} out of range for {len} locations")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("year {0} is not covered by the ENSO calendar")]
    UncoveredYear(i32),
    #[error("storm time {0} lies outside the (4/12, 11/12] season window")]
    OutOfSeason(f64),

    #[error("path is empty or not connected on the graph")]
    InvalidPath,
    #[error("damage must be strictly positive, got {0}")]
    NonPositiveDamage(f64),
    #[error("partial damages leave the simplex (sum must stay below the observed total)")]
    SimplexViolation,
    #[error("matrix is not symmetric positive-definite")]
    NotPositiveDefinite,
    #[error("propriety parameter {rho} outside ({lower}, {upper})")]
    RhoOutOfRange { rho: f64, lower: f64, upper: f64 },
    #[error("moment-generating function requires s <= 0, got {0}")]
    PositiveMgfArgument(f64),
    #[error("moment matching did not converge after {iterations} iterations (residuals {residuals:?})")]
    NoConvergence { iterations: usize, residuals: [f64; 2] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("storm `{storm}`: {message}")]
    InvalidStorm { storm: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::NonFinite(_) | Error::NotPositiveDefinite
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
