use thiserror::Error;

/// Failures raised by the numerical kernels and their inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system definition: {0}")]
    InvalidSystem(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon exceeded: need {needed} coordinates, horizon is {horizon}")]
    HorizonExceeded { needed: usize, horizon: usize },
    #[error("preimage enumeration unsupported: {0}")]
    PreimagesUnsupported(String),
    #[error("sampling scheme {scheme} unsupported for {system}")]
    SchemeUnsupported { scheme: String, system: String },
    #[error("instance too large: {size} exceeds limit {limit}")]
    InstanceTooLarge { size: usize, limit: usize },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("nonpositive value {value} at n = {n}")]
    NonpositiveValue { n: usize, value: f64 },
    #[error("series mixes bound types: {0}")]
    MixedBounds(String),
    #[error("bracket invalid: {0}")]
    BracketInvalid(String),
    #[error("partition does not cover the cloud: {0}")]
    PartitionIncomplete(String),
    #[error("cover does not cover the cloud: {0}")]
    CoverIncomplete(String),
    #[error("budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("base point out of range: {0}")]
    BasePointOutOfRange(String),
    #[error("ladder too short: {rungs} rungs, need at least {min}")]
    LadderTooShort { rungs: usize, min: usize },
    #[error("empty neighborhood at radius {0}")]
    EmptyNeighborhood(String),
    #[error("mismatched ladders: {0}")]
    MismatchedLadders(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("hard invariant violated: {0}")]
    InvariantViolation(String),
}

/// Coarse grouping used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Computational,
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidSystem(_) | InvalidPoint(_) | InvalidConfig(_) | WindowTooSmall(_)
            | BracketInvalid(_) | PartitionIncomplete(_) | CoverIncomplete(_)
            | BasePointOutOfRange(_) | LadderTooShort { .. } | MismatchedLadders(_)
            | SchemeUnsupported { .. } | NonpositiveValue { .. } | MixedBounds(_) => {
                ErrorClass::Validation
            }
            HorizonExceeded { .. } | PreimagesUnsupported(_) | InstanceTooLarge { .. }
            | BudgetExceeded { .. } | EmptyNeighborhood(_) | Unsupported(_) | Overflow(_) => {
                ErrorClass::Computational
            }
            InvariantViolation(_) => ErrorClass::Invariant,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
