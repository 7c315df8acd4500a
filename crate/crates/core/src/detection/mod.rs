//! Detector and segmenter interfaces, annotation-driven stub backends, and
//! the evaluation metrics (IoU, NMS, AP/mAP, mIoU).

mod backend;
mod metrics;

pub use backend::{AnnotationDetector, DetectorBackend, FrameAnnotation, LabelMapSegmenter, SegmenterBackend};
pub use metrics::{
    average_precision, evaluate, iou, mean_ap, miou, nms, EvalResult, FrameDetections,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgproc::{BinaryMask, ImageError};

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("malformed annotation at line {line}: {reason}")]
    MalformedAnnotation { line: usize, reason: String },
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("no label map for frame {0:?}")]
    MissingLabelMap(String),
    #[error("label map is {got_w}x{got_h} but the frame is {want_w}x{want_h}")]
    DimensionMismatch {
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("IoU threshold must lie in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error("at least one class is required")]
    EmptyInput,
    #[error("label {label} is outside 0..{num_classes}")]
    LabelOutOfRange { label: u8, num_classes: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Closed detector vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    #[serde(rename = "person")]
    Person,
    #[serde(rename = "with-mask")]
    WithMask,
    #[serde(rename = "without-mask")]
    WithoutMask,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [Self::Person, Self::WithMask, Self::WithoutMask];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Person => "person",
            Self::WithMask => "with-mask",
            Self::WithoutMask => "without-mask",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = DetectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| DetectionError::UnknownClass(s.to_owned()))
    }
}

/// Axis-aligned detection with top-left origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
    pub class: ObjectClass,
}

impl DetBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, score: f64, class: ObjectClass) -> Self {
        Self {
            x,
            y,
            w,
            h,
            score,
            class,
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Checks `w > 0`, `h > 0`, `score` in `[0, 1]` and finite coordinates.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err("box origin must be finite".into());
        }
        if !(self.w > 0.0 && self.w.is_finite() && self.h > 0.0 && self.h.is_finite()) {
            return Err(format!("box size must be positive, got {}x{}", self.w, self.h));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("score {} outside [0, 1]", self.score));
        }
        Ok(())
    }
}

/// Per-pixel class ids; 0 is background and 1 is person.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

pub const BACKGROUND_CLASS: u8 = 0;
pub const PERSON_CLASS: u8 = 1;

impl SegmentationMap {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self, DetectionError> {
        if labels.len() != width as usize * height as usize {
            return Err(ImageError::DimensionMismatch {
                expected: width as usize * height as usize,
                actual: labels.len(),
            }
            .into());
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Binary mask of every pixel labelled `class_id`.
    pub fn class_mask(&self, class_id: u8) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == class_id).collect(),
        )
        .expect("dimensions checked at construction")
    }

    pub fn count(&self, class_id: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class_id).count()
    }
}
