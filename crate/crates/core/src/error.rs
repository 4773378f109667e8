use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coordinate overflow at generation {generation}")]
    Overflow { generation: u64 },

    #[error("exact computation refused: {what} needs {needed} work units, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("tables do not match: {0}")]
    Mismatch(String),

    #[error("p_c bracket does not straddle zero slope: {0}")]
    Bracket(String),

    #[error("hypothesis violated by caller: {0}")]
    Hypothesis(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty or invalid window: {0}")]
    Window(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
