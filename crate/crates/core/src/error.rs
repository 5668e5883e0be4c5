use std::path::PathBuf;

use thiserror::Error;

use crate::game::PureProfile;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("payoff cell {0} has never been simulated")]
    MissingEntry(PureProfile),
    #[error("strategy index {index} out of bounds for player {player} (set size {size})")]
    OutOfBounds {
        player: usize,
        index: usize,
        size: usize,
    },
    #[error("empirical game is incomplete: {missing} profile(s) lack payoffs")]
    IncompleteGame { missing: usize },
    #[error("no equilibrium found within tolerance {tolerance:e} (best residual {best_residual:e})")]
    NoEquilibriumFound { tolerance: f64, best_residual: f64 },
    #[error("policy for player {player} chose illegal action {action} (legal: {legal:?})")]
    IllegalAction {
        player: usize,
        action: usize,
        legal: Vec<usize>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training budget is zero")]
    BudgetZero,
    #[error("operation requires a matrix-game environment, got `{0}`")]
    WrongEnvironment(String),
    #[error("no stored response for opponent strategy {0}")]
    MissingResponse(usize),
    #[error("policy `{0}` is not value-based")]
    NotValueBased(String),
    #[error("algorithm supports only {supported} players, environment has {actual}")]
    PlayerCountUnsupported { supported: usize, actual: usize },
    #[error("corrupt checkpoint at {path}: {reason}")]
    CorruptCheckpoint { path: PathBuf, reason: String },
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("deviation set for player {0} is empty")]
    EmptyDeviationSet(usize),
    #[error("no observations were collected")]
    EmptyCorpus,
    #[error("environment mismatch: `{0}` vs `{1}`")]
    EnvironmentMismatch(String, String),
    #[error("malformed game file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::CorruptCheckpoint {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// True for errors caused by user input rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidArgument(_))
    }
}
