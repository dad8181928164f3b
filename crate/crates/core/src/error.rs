use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("capacity exceeded: {what} requested {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("{op} is only defined for {expected} qubits, got {got}")]
    UnsupportedSize {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("undefined observable: {0}")]
    UndefinedObservable(String),

    #[error("cannot fit decay rate: {0}")]
    FitDomain(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{kind} '{name}' is already registered")]
    DuplicateStrategy { kind: &'static str, name: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for the command-line runner: 1 for bad input,
    /// 2 for numerical failures, 3 for capacity limits.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Capacity { .. } => 3,
            Error::IntegrationFailure { .. }
            | Error::Invariant(_)
            | Error::FitDomain(_)
            | Error::UndefinedObservable(_) => 2,
            _ => 1,
        }
    }
}
