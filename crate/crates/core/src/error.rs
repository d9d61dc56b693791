use thiserror::Error;

/// Unified error type for the crate.
///
/// Variants map onto the CLI exit-code table: invalid input/config → 2,
/// I/O and file-format problems → 3, numerical failures → 4, and
/// degenerate or infeasible data → 5.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("infeasible data: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error kind.
    ///
    /// 2 = configuration/usage, 3 = I/O or format, 4 = numerical,
    /// 5 = degenerate or infeasible data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::InvalidState(_) => 2,
            Error::Io(_) | Error::Format(_) => 3,
            Error::Numerical(_) => 4,
            Error::DegeneratePartition(_)
            | Error::DegenerateInput(_)
            | Error::Infeasible(_) => 5,
        }
    }
}
