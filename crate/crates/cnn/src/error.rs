use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dataset too small: {samples} samples cannot fill {folds} folds")]
    DataTooSmall { samples: usize, folds: usize },

    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("model file is corrupt: {0}")]
    CorruptModel(String),

    #[error("malformed dataset file at line {line}: {reason}")]
    MalformedData { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] panoma_core::Error),
}

pub type Result<T> = std::result::Result<T, CnnError>;
