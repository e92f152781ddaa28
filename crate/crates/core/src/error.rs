use thiserror::Error;

/// Errors raised by the simulation library.
///
/// The variants map onto the process exit codes used by the command-line
/// runner; see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value is malformed or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The lattice is too coarse for the requested level or length scale.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// A run would exceed the node or memory budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// A level was requested beyond what has been simulated.
    #[error("level out of range: {0}")]
    Range(String),
    /// Malformed or empty input data.
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A structural check failed (for example an approximation scheme overlap).
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable exit code contract: 2 for bad input or configuration, 3 for
    /// resolution and budget violations, 4 for output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Input(_)
            | Error::Unsupported(_)
            | Error::Validation(_) => 2,
            Error::Resolution(_) | Error::Budget(_) | Error::Range(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
