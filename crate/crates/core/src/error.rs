use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a single-file NIfTI-1 image: bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported NIfTI datatype code {0} (expected uint8, int16 or float32)")]
    UnsupportedDtype(i16),

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(&'static str),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(&'static str),

    #[error("truncated file: need {expected} bytes, got {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("invalid label value {0} (expected one of 0, 1, 2, 4)")]
    InvalidLabel(f64),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("volume has no nonzero voxels")]
    EmptyVolume,

    #[error("mask has no foreground voxels")]
    EmptyMask,

    #[error("volume is constant")]
    ConstantVolume,

    #[error("bounding box {lo:?}..={hi:?} is outside shape {shape:?}")]
    OutOfBounds {
        lo: [usize; 3],
        hi: [usize; 3],
        shape: [usize; 3],
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        actual: [usize; 3],
    },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("empty input list")]
    EmptyList,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("patches do not match tiling plan: {0}")]
    PlanMismatch(String),

    #[error("window index {index} out of range ({count} windows)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("phantom radii do not fit inside shape {0:?}")]
    RadiiDontFit([usize; 3]),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("no matching prediction/ground-truth pair for case {0}")]
    UnpairedCase(String),

    #[error("case {case}: {source}")]
    Case {
        case: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[cfg(feature = "pipeline")]
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    #[cfg(feature = "pipeline")]
    pub(crate) fn in_case(self, case: &str) -> Self {
        Error::Case {
            case: case.to_string(),
            source: Box::new(self),
        }
    }
}
