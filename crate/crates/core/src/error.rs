use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for {len} metrics")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least {needed} shape samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no incomparable pair found after {attempts} draws")]
    NoIncomparablePair { attempts: usize },

    #[error("query budget exhausted ({budget} queries)")]
    BudgetExhausted { budget: usize },

    #[error("no pending query to answer")]
    NoPendingQuery,

    #[error("kendall tau undefined: {0}")]
    DegenerateRanking(String),

    #[error("corrupt session document: {0}")]
    CorruptSession(String),

    #[error("unsupported session document version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("replayed query {index} does not match the recorded pair")]
    ReplayMismatch { index: usize },

    #[error("oracle failed: {0}")]
    Oracle(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
