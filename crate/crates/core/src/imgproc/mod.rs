//! Raster primitives: PGM I/O, Gaussian blur, Canny edges and binary morphology.

mod filter;
mod image;
mod morphology;
mod pgm;

pub use filter::{canny, gaussian_blur, gradient_magnitude, CannyParams};
pub use image::{BinaryMask, GrayImage};
pub use morphology::{close_gaps, dilate, erode, StructuringElement};
pub use pgm::{encode_pgm, encode_pgm_ascii, load_pgm};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} samples, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("unsupported maxval {0} (only 8-bit images are handled)")]
    UnsupportedMaxval(u32),
    #[error("sigma must be positive and finite, got {0}")]
    NonPositiveSigma(f64),
    #[error("hysteresis thresholds must satisfy 0 <= low < high, got low={low} high={high}")]
    ThresholdOrder { low: f64, high: f64 },
    #[error("closing needs at least one iteration")]
    ZeroIterations,
    #[error("invalid structuring element: {0}")]
    InvalidStructuringElement(String),
    #[error("image dimensions must be non-zero")]
    EmptyImage,
    #[error("pixel buffer length {actual} does not match dimensions ({expected})")]
    DimensionMismatch { expected: usize, actual: usize },
}
