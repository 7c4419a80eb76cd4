use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // --- NRRD IO ---
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed NRRD header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NRRD dimension {found} (expected {expected})")]
    UnsupportedDimension { found: usize, expected: usize },
    #[error("unsupported NRRD field value: {0}")]
    Unsupported(String),
    #[error("NRRD payload holds {found} bytes but header sizes require {expected}")]
    SizeMismatch { expected: usize, found: usize },

    // --- geometry and values ---
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid orientation code {0:?}")]
    InvalidOrientation(String),
    #[error("trilinear interpolation is not defined for discrete voxel types")]
    InterpolationNotSupported,
    #[error("mask is empty")]
    EmptyMask,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // --- registration ---
    #[error("images do not overlap under the current transform")]
    NoOverlap,
    #[error("registration diverged: {0}")]
    Diverged(String),

    // --- atlas / mask generation ---
    #[error("label {0} is outside the AHA-17 range 0..=17")]
    LabelOutOfRange(u32),
    #[error("segment id {0} is outside 1..=17")]
    SegmentOutOfRange(u8),
    #[error("no connected set of {requested} segments exists within the allowed rings (largest: {largest})")]
    NoConnectedSet { requested: usize, largest: usize },
    #[error("segment {segment}: could not reach 10% of the {target_ml:.3} mL target (best {achieved_ml:.3} mL)")]
    VolumeUnreachable {
        segment: u8,
        target_ml: f64,
        achieved_ml: f64,
    },

    // --- diffusion ---
    #[error("noise predictor failed: {0}")]
    Predictor(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
