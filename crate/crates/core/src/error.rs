use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid lottery: {0}")]
    InvalidLottery(String),

    #[error("agent {agent} never receives bundle {bundle:?} under the lottery")]
    NullConditioning { agent: usize, bundle: Vec<usize> },

    #[error("enumeration of {states} states exceeds the cap of {cap}")]
    CapExceeded { states: u128, cap: u128 },

    #[error("operation requires a matching instance (agents = items), got {agents} agents and {items} items")]
    NotMatchingInstance { agents: usize, items: usize },

    #[error("no perfect matching exists within the allowed edges")]
    NoPerfectMatching,

    #[error("no iEF lottery exists for this instance")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("no iEF lottery is supported on positive-value edges although iEF lotteries exist")]
    LogNashUnsupportable,

    #[error("column generation hit the iteration cap of {cap} (last violation {last_violation:e})")]
    IterationLimit { cap: usize, last_violation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("interim envy graph has a positive-weight cycle")]
    PositiveCycle,

    #[error("payment scheme does not fit the lottery: {0}")]
    SchemeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
