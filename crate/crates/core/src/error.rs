use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("throughput undefined for non-positive delay {0}")]
    NonPositiveDelay(f64),

    #[error("ranks are not a permutation of 1..={0}")]
    NotAPermutation(usize),

    #[error(
        "{capped} of {n_samples} delay samples exceeded the cap of {cap} blocks \
         (tx power {tx_power}, distance {distance})"
    )]
    CappedSamples {
        capped: usize,
        n_samples: usize,
        cap: u64,
        tx_power: f64,
        distance: f64,
    },

    #[error("planning complete: no user has spare cache capacity")]
    PlanningComplete,

    #[error("exhaustive search needs {combinations} combinations, budget is {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "config",
            Error::InvalidInput(_)
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::NotAPermutation(_) => "input",
            Error::NonPositiveDelay(_) => "domain",
            Error::CappedSamples { .. } => "capped-sample",
            Error::PlanningComplete => "planning-complete",
            Error::BudgetExceeded { .. } => "budget",
        }
    }
}
