use thiserror::Error;

/// Errors raised by the imaging toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coincident positions: antenna and scene point are the same")]
    CoincidentPositions,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("duplicate virtual grid index ({row}, {col})")]
    DuplicateVirtualIndex { row: usize, col: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArchitecture(_) => "invalid-architecture",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::CoincidentPositions => "coincident-positions",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::DuplicateVirtualIndex { .. } => "duplicate-virtual-index",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
