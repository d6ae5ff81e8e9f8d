//! Error type shared by the library and the CLI.
//!
//! Variants are grouped by how the CLI reports them: malformed input (exit 1),
//! model-hypothesis violations (exit 2), and solver non-convergence (exit 3).

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Malformed file, config, or argument.
    #[error("invalid input: {0}")]
    Input(String),

    /// A vector or matrix does not have the declared size.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },

    /// A value is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural assumption of the model does not hold for these inputs.
    #[error("model hypothesis violated: {0}")]
    Hypothesis(String),

    /// A linear system was singular or its solution failed the residual check.
    #[error("linear solve failed in {context}: {detail}")]
    Singular { context: String, detail: String },

    /// An iterative procedure exhausted its budget without meeting tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Dimension { .. }
            | Error::Domain(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            Error::Hypothesis(_) | Error::Singular { .. } => 2,
            Error::NonConvergence(_) => 3,
        }
    }
}
