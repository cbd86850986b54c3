use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cycle range {from}..={to} is outside 1..={available}")]
    Range {
        from: usize,
        to: usize,
        available: usize,
    },

    #[error("cycle {k} exceeds the fixed lifespan {m}")]
    LifespanExceeded { k: usize, m: usize },

    #[error("malformed program code: {0}")]
    MalformedCode(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("history violates action/percept alternation: {0}")]
    Alternation(String),

    #[error("conditioning on a history of zero mixture mass")]
    ZeroMass,

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("empty policy pool: {0}")]
    EmptyPool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
