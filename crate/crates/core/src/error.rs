use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed raster: {0}")]
    MalformedRaster(String),

    #[error("expected {expected} channel(s), found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("raster has zero width or height")]
    ZeroDimensions,

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("class id {class_id} appears in both level {first} and level {second}")]
    OverlappingLevels { class_id: u8, first: usize, second: usize },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("weight container is missing tensor `{0}`")]
    MissingTensor(String),

    #[error("weight blob too short: need {needed} bytes, have {actual}")]
    BlobTooShort { needed: usize, actual: usize },

    #[error("mask covers the entire image; nothing to diffuse from")]
    FullMask,

    #[error("cutout at ({x}, {y}) of size {w}x{h} does not fit a {base_w}x{base_h} base image")]
    OutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        base_w: usize,
        base_h: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            found_w: found.0,
            found_h: found.1,
        }
    }
}
