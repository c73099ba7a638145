use std::path::PathBuf;

/// Errors produced anywhere in the scoring pipeline or the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("image is {width}x{height}; both dimensions must be at least {min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("plane is {width}x{height}; both dimensions must be at least {min}")]
    PlaneTooSmall { width: usize, height: usize, min: usize },

    #[error("inconsistent decomposition dimensions: {0}")]
    InconsistentDimensions(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("feature layouts differ")]
    LayoutMismatch,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),

    #[error("malformed dump file: {0}")]
    MalformedDump(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotFound(_)
            | Error::Io { .. }
            | Error::UnsupportedFormat { .. }
            | Error::MissingFiles(_)
            | Error::MalformedDump(_)
            | Error::Parse { .. } => 2,
            Error::ImageTooSmall { .. }
            | Error::PlaneTooSmall { .. }
            | Error::InconsistentDimensions(_)
            | Error::DimensionMismatch(_)
            | Error::LayoutMismatch => 3,
            Error::InvalidParams(_) => 4,
            Error::DegenerateInput(_) => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
