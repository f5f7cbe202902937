use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{}format error at line {line}: {message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Format {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("model file corrupted: {0}")]
    Corruption(String),

    #[error("undefined identity: feature vector has zero norm")]
    UndefinedIdentity,

    #[error("batch error: {0}")]
    Batch(String),

    #[error("training diverged at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("registration error: {0}")]
    Registration(String),

    #[error("boundary error: {0}")]
    Boundary(String),

    #[error("tally error: {0}")]
    Tally(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn with_path(self, path: &std::path::Path) -> Self {
        match self {
            Error::Format { line, message, .. } => Error::Format {
                path: Some(path.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }
}
