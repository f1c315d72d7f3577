use thiserror::Error;

use crate::svm::DualSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel matrices do not share an index map")]
    IndexMapMismatch,

    #[error("weights are not on the probability simplex (sum = {sum}, min = {min})")]
    OffSimplex { sum: f64, min: f64 },

    #[error("index coverage mismatch: {0}")]
    Coverage(String),

    #[error("degenerate class set: {0}")]
    DegenerateClasses(String),

    #[error("kernel matrix is not positive semi-definite even after diagonal jitter")]
    NotPsd,

    #[error("SMO did not converge within {iterations} iterations (violation {violation:.3e})")]
    SolverFailure {
        iterations: usize,
        violation: f64,
        best: Box<DualSolution>,
    },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("kappa is undefined: expected agreement equals 1")]
    UndefinedKappa,

    #[error("runs do not share an iteration grid")]
    MismatchedGrids,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("unknown identifier {0}")]
    UnknownIdentifier(usize),

    #[error("model is untrained")]
    Untrained,

    #[error("insufficient population for class {class}: need {needed}, have {available}")]
    InsufficientClass {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error(transparent)]
    Parse(#[from] crate::data::ParseError),

    #[error(transparent)]
    Config(#[from] crate::harness::ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
