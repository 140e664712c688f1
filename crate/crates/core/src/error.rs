use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative probability mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("table sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("table has {got} entries, alphabets require {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` appears more than once")]
    DuplicateVariable(String),

    #[error("alphabets differ: {0}")]
    AlphabetMismatch(String),

    #[error("state space of {size} entries exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },

    #[error("conditional row {row} is undefined but carries mass")]
    UndefinedConditional { row: usize },

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
