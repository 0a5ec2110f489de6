use thiserror::Error;

/// Errors raised by the design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A precondition on an input (bounds on a field, a solved state, ...) was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    /// The load profile does no work on its own displacement field.
    #[error("degenerate load profile: {0}")]
    DegenerateLoad(String),

    #[error(
        "operation requires homogeneous Dirichlet data, but dof {dof} is prescribed to {value}"
    )]
    NonHomogeneousDirichlet { dof: usize, value: f64 },

    #[error("unsupported objective: {0}")]
    UnsupportedObjective(String),

    #[error("config key `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
