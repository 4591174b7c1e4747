//! Crate-wide error type and process exit-code mapping.

use thiserror::Error;

/// All failure modes surfaced by the simulator and its CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file or preset failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A throw has no ballistic solution (e.g. released below the bin rim
    /// while moving downward).
    #[error("degenerate throw: {0}")]
    DegenerateThrow(String),

    /// A persisted artifact is malformed or incompatible.
    #[error("bad artifact: {0}")]
    BadArtifact(String),

    /// Training produced non-finite parameters or losses.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// An optimization problem has no feasible solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A hyperparameter study ended with no completed trial.
    #[error("study failed: {0}")]
    StudyFailed(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// TOML parse failure.
    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Maps the error to the CLI exit code contract: 1 for usage errors,
    /// 2 for validation failures, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::InvalidConfig(_) => 2,
            Error::DegenerateThrow(_) | Error::BadArtifact(_) => 3,
            Error::Diverged(_) | Error::Infeasible(_) | Error::StudyFailed(_) => 3,
            Error::Io(_) | Error::Json(_) | Error::Toml(_) => 3,
        }
    }
}
