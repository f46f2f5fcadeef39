use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("image size {h}x{w} not divisible by 4")]
    SizeNotDivisible { h: usize, w: usize },
    #[error("discriminator input too small: stage {stage} would see {size} px (< 4)")]
    DiscriminatorInputTooSmall { stage: usize, size: usize },
    #[error("class id {id} out of range (C = {classes})")]
    ClassOutOfRange { id: usize, classes: usize },
    #[error("non-finite loss at iteration {iter}: {report}")]
    NonFinite { iter: usize, report: String },
    #[error("wilcoxon: fewer than 5 usable pairs after dropping zero differences (n = {n})")]
    TooFewPairs { n: usize },
    #[error("empty training run")]
    EmptyRun,
    #[error("corrupt manifest at {path}: {reason}")]
    CorruptManifest { path: PathBuf, reason: String },
    #[error("blob size mismatch for {name}: expected {expected} bytes, got {got}")]
    BlobMismatch { name: String, expected: usize, got: usize },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// CLI exit code classification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Shape { .. }
            | Error::SizeNotDivisible { .. }
            | Error::DiscriminatorInputTooSmall { .. }
            | Error::ClassOutOfRange { .. }
            | Error::TooFewPairs { .. }
            | Error::EmptyRun => 3,
            Error::NonFinite { .. } => 4,
            Error::CorruptManifest { .. } | Error::BlobMismatch { .. } | Error::Io { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
