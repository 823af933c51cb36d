use std::fmt;

/// The selection inequality a parameter scan was trying to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `sum_{l<=L} beta_{2l-1}^2 >= 64 C^2`
    OddMass,
    /// `sum_{k<=L} beta_{2k}^2 <= (1/8) sum_{k<=M} beta_{2k}^2`
    EvenRatio,
    /// `sum_{k<=M} beta_{2k}^2 > 1`
    EvenMassAboveOne,
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inequality::OddMass => write!(f, "odd-mass bound sum_{{l<=L}} beta_{{2l-1}}^2 >= 64 C^2"),
            Inequality::EvenRatio => {
                write!(f, "even-ratio bound sum_{{k<=L}} beta_{{2k}}^2 <= (1/8) sum_{{k<=M}} beta_{{2k}}^2")
            }
            Inequality::EvenMassAboveOne => write!(f, "even-mass bound sum_{{k<=M}} beta_{{2k}}^2 > 1"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("epsilon sequence is empty")]
    EmptyEpsilon,
    #[error("epsilon entry is not positive at index {index}")]
    NotPositive { index: usize },
    #[error("epsilon entry is negative or not finite at index {index}")]
    InvalidEntry { index: usize },
    #[error("not non-increasing at index {index}")]
    NotNonIncreasing { index: usize },
    #[error("invalid epsilon spec `{spec}`: {reason}")]
    EpsSpec { spec: String, reason: String },
    #[error("requested {requested} terms but only {available} are available")]
    Length { requested: usize, available: usize },
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "epsilon too summable at this scale: {inequality} not reached after scanning {scanned} indices ({})",
        if *exhausted { "sequence exhausted" } else { "scan cap reached" }
    )]
    TooSummable { inequality: Inequality, scanned: usize, exhausted: bool },
    #[error("construction needs ambient dimension {required}, above the guard max_dim = {max_dim}")]
    DimensionGuard { required: usize, max_dim: usize },
    #[error("primal family is rank deficient: smallest/largest singular value ratio {ratio:e}")]
    Conditioning { ratio: f64 },
    #[error("power iteration did not converge in {iterations} iterations (last estimate {last_estimate})")]
    Convergence { iterations: usize, last_estimate: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("malformed permutation: {0}")]
    MalformedPermutation(String),
    #[error("parameters do not match the system: {0}")]
    ParamsMismatch(String),
    #[error("exhaustive search over {n} vectors needs {} orders ({n}!), above the limit n <= {limit}", order_count(*count))]
    TooManyOrders { n: usize, count: u128, limit: usize },
    #[error("size guard: {what} is {size}, limit {limit}")]
    SizeGuard { what: &'static str, size: usize, limit: usize },
    #[error("{0} requires an even number of vectors")]
    OddLength(usize),
    #[error("vector is zero")]
    ZeroVector,
    #[error("malformed system file at `{path}`: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `count` is saturated at `u128::MAX` when `n!` does not fit.
fn order_count(count: u128) -> String {
    if count == u128::MAX {
        "more than 3.4e38".into()
    } else {
        count.to_string()
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
