use thiserror::Error;

/// Failure modes shared by every solver in the crate.
///
/// The variants map one-to-one onto the CLI exit statuses: domain and setup
/// problems are caller mistakes, solver and accuracy problems are numerical,
/// resource problems come from the combinatorial guards.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("accuracy error: {message}")]
    Accuracy {
        message: String,
        /// Suggested value of the parameter that controls the error, when one exists.
        required: Option<f64>,
    },

    #[error("resource limit: {message} (estimated count {estimate})")]
    Resource { message: String, estimate: u64 },

    #[error("setup error: {0}")]
    Setup(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn accuracy(msg: impl Into<String>, required: Option<f64>) -> Self {
        Error::Accuracy {
            message: msg.into(),
            required,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
