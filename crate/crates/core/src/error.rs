use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quantile level {0} outside [0, 1)")]
    QuantileOutOfRange(f64),

    #[error("{0} did not converge within the iteration budget")]
    NoConvergence(&'static str),

    #[error("density undefined or zero at x = {0}")]
    UndefinedDensity(f64),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("distribution has infinite mean; revenue-to-welfare ratio is undefined")]
    InfiniteMean,

    #[error("feasibility environment is not downward-closed")]
    NotDownwardClosed,

    #[error("{n} agents exceeds the supported maximum of {max} for this operation")]
    TooManyAgents { n: usize, max: usize },

    #[error("value profile has {got} entries, environment has {expected} agents")]
    ProfileLength { expected: usize, got: usize },

    #[error("allocation rule is not monotone in the bid of agent {0}")]
    NonMonotoneAllocation(usize),

    #[error("median atom cannot be split into a fair medially coupled sign")]
    CouplingInfeasible,

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(&'static str),

    #[error("unknown mechanism id {0:?}")]
    UnknownMechanism(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
