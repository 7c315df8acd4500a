use std::collections::HashMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetBox, DetectionError, SegmentationMap};
use crate::imgproc::{load_pgm, GrayImage};

/// Source of mask/person detections for a frame.
pub trait DetectorBackend: Send + Sync {
    fn detect(&self, frame_id: &str, frame: &GrayImage) -> Result<Vec<DetBox>, DetectionError>;
}

/// Source of per-pixel class maps for a frame.
pub trait SegmenterBackend: Send + Sync {
    fn segment(&self, frame_id: &str, frame: &GrayImage) -> Result<SegmentationMap, DetectionError>;
}

/// One NDJSON annotation record: `{"frame_id": ..., "boxes": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub frame_id: String,
    pub boxes: Vec<DetBox>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    score: f64,
    class: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    frame_id: String,
    boxes: Vec<RawBox>,
}

impl FrameAnnotation {
    /// Parses NDJSON annotations; blank lines are skipped.
    pub fn parse_ndjson(reader: impl BufRead) -> Result<Vec<FrameAnnotation>, DetectionError> {
        let mut out = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| DetectionError::MalformedAnnotation {
                line: idx + 1,
                reason,
            };
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let mut boxes = Vec::with_capacity(raw.boxes.len());
            for b in raw.boxes {
                let det = DetBox::new(b.x, b.y, b.w, b.h, b.score, b.class.parse()?);
                det.validate().map_err(malformed)?;
                boxes.push(det);
            }
            out.push(FrameAnnotation {
                frame_id: raw.frame_id,
                boxes,
            });
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Vec<FrameAnnotation>, DetectionError> {
        let file = fs::File::open(path)?;
        Self::parse_ndjson(std::io::BufReader::new(file))
    }
}

/// Replays annotated boxes as detections; unknown frames detect nothing.
#[derive(Clone, Debug, Default)]
pub struct AnnotationDetector {
    frames: HashMap<String, Vec<DetBox>>,
}

impl AnnotationDetector {
    pub fn from_annotations(records: Vec<FrameAnnotation>) -> Result<Self, DetectionError> {
        let mut frames = HashMap::with_capacity(records.len());
        for (i, rec) in records.into_iter().enumerate() {
            if frames.contains_key(&rec.frame_id) {
                return Err(DetectionError::MalformedAnnotation {
                    line: i + 1,
                    reason: format!("duplicate frame_id {:?}", rec.frame_id),
                });
            }
            frames.insert(rec.frame_id, rec.boxes);
        }
        Ok(Self { frames })
    }

    pub fn from_path(path: &Path) -> Result<Self, DetectionError> {
        Self::from_annotations(FrameAnnotation::load(path)?)
    }
}

impl DetectorBackend for AnnotationDetector {
    fn detect(&self, frame_id: &str, _frame: &GrayImage) -> Result<Vec<DetBox>, DetectionError> {
        Ok(self.frames.get(frame_id).cloned().unwrap_or_default())
    }
}

/// Serves `<frame_id>.pgm` label maps from a directory, loaded eagerly.
#[derive(Clone, Debug, Default)]
pub struct LabelMapSegmenter {
    maps: HashMap<String, SegmentationMap>,
}

impl LabelMapSegmenter {
    pub fn from_dir(dir: &Path) -> Result<Self, DetectionError> {
        let mut maps = HashMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let img = load_pgm(&fs::read(&path)?)?;
            let (w, h) = (img.width(), img.height());
            maps.insert(stem.to_owned(), SegmentationMap::new(w, h, img.into_data())?);
        }
        Ok(Self { maps })
    }

    pub fn insert(&mut self, frame_id: impl Into<String>, map: SegmentationMap) {
        self.maps.insert(frame_id.into(), map);
    }
}

impl SegmenterBackend for LabelMapSegmenter {
    fn segment(&self, frame_id: &str, frame: &GrayImage) -> Result<SegmentationMap, DetectionError> {
        let map = self
            .maps
            .get(frame_id)
            .ok_or_else(|| DetectionError::MissingLabelMap(frame_id.to_owned()))?;
        if (map.width(), map.height()) != (frame.width(), frame.height()) {
            return Err(DetectionError::DimensionMismatch {
                want_w: frame.width(),
                want_h: frame.height(),
                got_w: map.width(),
                got_h: map.height(),
            });
        }
        Ok(map.clone())
    }
}
