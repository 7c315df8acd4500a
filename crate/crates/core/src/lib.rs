//! Edge contact-tracing pipeline.
//!
//! Segmented frames are turned into person objects (Canny, gap closing,
//! contours, minimum-area rectangles), paired distances are converted to
//! metres with a reference calibration, and every frame yields mask and
//! distance events that are persisted as NDJSON and streamed to a collector.

pub mod bench;
pub mod detection;
pub mod distancing;
pub mod edge_node;
pub mod geometry;
pub mod imgproc;

pub use bench::{FixtureRecord, TimingReport};
pub use detection::{DetBox, EvalResult, ObjectClass, SegmentationMap};
pub use distancing::{CalibrationProfile, ComplianceReport, DetectedObject, DistancingConfig};
pub use edge_node::{Event, PipelineConfig, RunSummary};
pub use geometry::{Contour, OrderedCorners, Point, RotatedBox};
pub use imgproc::{BinaryMask, GrayImage};
