use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The probing cost exceeds the mean, so no non-negative index exists.
    #[error("no reservation value: cost {cost} exceeds mean {mean}")]
    NoIndex { cost: f64, mean: f64 },

    #[error("{what} too large for exhaustive search: {size} > {limit}")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("reference assignment is not rho-feasible: {0}")]
    RhoInfeasibleReference(String),

    #[error("guess is inconsistent with the instance: {0}")]
    InfeasibleGuess(String),

    #[error("no verified solution found")]
    Infeasible,

    #[error("guess budget exhausted after {tried} guesses")]
    Exhausted { tried: usize },

    #[error("wrong parameter regime: {0}")]
    WrongRegime(String),

    #[error("retries exhausted after {attempts} attempts")]
    RetriesExhausted { attempts: usize },

    #[error("infeasible policy: {0}")]
    InfeasiblePolicy(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
