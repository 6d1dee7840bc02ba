use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// Each variant maps onto one process exit code of the `susyq` binary, see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),

    #[error("combinatorial cap exceeded: {candidates} candidates > cap {cap}")]
    CombinatorialCap { candidates: u128, cap: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit status reported by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::TruncationInsufficient(_) => 3,
            Error::CombinatorialCap { .. } => 4,
            Error::Numerical(_) | Error::Consistency(_) | Error::Dimension(_) => 5,
            Error::Domain(_) => 2,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
