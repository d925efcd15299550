use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}: expected a 16-bit single-channel raster, found {found}")]
    BitDepth { path: PathBuf, found: String },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("metadata {path} is missing required field `{field}`")]
    MissingField { path: PathBuf, field: &'static str },

    #[error("dimension mismatch: metadata declares {declared_w}x{declared_h}, image is {actual_w}x{actual_h}")]
    DimensionMismatch {
        declared_w: usize,
        declared_h: usize,
        actual_w: usize,
        actual_h: usize,
    },

    #[error("invalid height map: {0}")]
    InvalidMap(String),

    #[error("invalid region {region_id}: {reason}")]
    InvalidRegion { region_id: String, reason: String },

    #[error("filter radius {radius_px:.3} px is smaller than one pixel")]
    RadiusTooSmall { radius_px: f64 },

    #[error("patch side {side_px} px is below the minimum of {min} px")]
    PatchTooSmall { side_px: usize, min: usize },

    #[error("region {region_id} is too small to hold a single {side_px} px patch")]
    RegionTooSmall { region_id: String, side_px: usize },

    #[error("expected a square patch, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("orientation {0} out of range 0..8")]
    Orientation(u8),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("sample size {sample_size} yields an empty {which} set at val_fraction {val_fraction}")]
    EmptySplit {
        sample_size: usize,
        val_fraction: f64,
        which: &'static str,
    },

    #[error("fold file {path}: {reason}")]
    FoldFile { path: PathBuf, reason: String },

    #[error("test-set size mismatch: fold accuracies have n_test = {acc}, model was built for n = {model}")]
    TestSizeMismatch { acc: usize, model: usize },

    #[error("conflicting verdicts for pair {0}")]
    ConflictingVerdicts(String),

    #[error("graph has no edges; modularity is undefined")]
    NoEdges,

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
