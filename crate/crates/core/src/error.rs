use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected} arms, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// KL(p || q) is infinite: `p` puts mass on an arm where `q` has none.
    #[error("absolute continuity violated at arm {arm}")]
    NotAbsolutelyContinuous { arm: usize },

    #[error("observation arity mismatch at round {t}: {reason}")]
    ObservationMismatch { t: u64, reason: &'static str },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: u64, what: &'static str },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
