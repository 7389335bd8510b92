use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("truncated image data: expected {expected} bytes, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("pixel buffer holds {actual} bytes but {width}x{height}x{channels} needs {expected}")]
    DataLength {
        width: usize,
        height: usize,
        channels: usize,
        expected: usize,
        actual: usize,
    },
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("format {format} cannot hold {mode} pixels")]
    ModeMismatch {
        format: &'static str,
        mode: &'static str,
    },
    #[error("crop {crop_w}x{crop_h} exceeds image {width}x{height}")]
    CropOutOfBounds {
        crop_w: usize,
        crop_h: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid op chain: {0}")]
    InvalidChain(String),
    #[error("camera id must be nonempty")]
    EmptyCameraId,
}
