use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("corrupt raster stream in {path}: {reason}")]
    CorruptRaster { path: PathBuf, reason: String },

    #[error("unsupported bit depth {depth} in {path} (expected 8 or 16)")]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },

    #[error("cannot write {path}: {reason}")]
    Unwritable { path: PathBuf, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate polar geometry: {0}")]
    DegenerateGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("missing gradient for parameter {0}")]
    MissingGradient(String),

    #[error("unknown pattern: {0}")]
    UnknownPattern(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {state}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        state: String,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable, machine-parseable identifier for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "missing_file",
            Error::CorruptRaster { .. } => "corrupt_raster",
            Error::UnsupportedBitDepth { .. } => "unsupported_bit_depth",
            Error::Unwritable { .. } => "unwritable",
            Error::Io(_) => "io",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::GeometryMismatch(_) => "geometry_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ImageTooSmall(_) => "image_too_small",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::MissingGradient(_) => "missing_gradient",
            Error::UnknownPattern(_) => "unknown_pattern",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Manifest(_) => "manifest",
            Error::Checkpoint(_) => "checkpoint",
            Error::ConfigMismatch(_) => "config_mismatch",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
