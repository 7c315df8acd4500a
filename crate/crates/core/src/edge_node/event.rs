use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EdgeError;
use crate::detection::{DetBox, ObjectClass};
use crate::distancing::ComplianceReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    MaskEvent,
    DistanceEvent,
    ErrorEvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskDetection {
    #[serde(rename = "box")]
    pub bbox: BoxGeometry,
    pub class: ObjectClass,
    pub score: f64,
}

impl From<&DetBox> for MaskDetection {
    fn from(b: &DetBox) -> Self {
        Self {
            bbox: BoxGeometry {
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
            },
            class: b.class,
            score: b.score,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPayload {
    pub detections: Vec<MaskDetection>,
    /// False as soon as any detection is `without-mask`.
    pub compliant: bool,
}

impl MaskPayload {
    pub fn from_boxes(boxes: &[DetBox]) -> Self {
        Self {
            detections: boxes.iter().map(MaskDetection::from).collect(),
            compliant: boxes.iter().all(|b| b.class != ObjectClass::WithoutMask),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    MaskEvent(MaskPayload),
    DistanceEvent(ComplianceReport),
    ErrorEvent(ErrorPayload),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub frame_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self.body {
            EventBody::MaskEvent(_) => EventKind::MaskEvent,
            EventBody::DistanceEvent(_) => EventKind::DistanceEvent,
            EventBody::ErrorEvent(_) => EventKind::ErrorEvent,
        }
    }

    /// Canonical single-line JSON with object keys sorted at every level.
    pub fn to_line(&self) -> String {
        // serde_json::Value maps are ordered by key.
        serde_json::to_value(self)
            .and_then(|v| serde_json::to_string(&v))
            .expect("events always serialise")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Appends one event line to `sink_path`, creating the file if needed.
pub fn emit_ndjson(event: &Event, sink_path: &Path) -> Result<(), EdgeError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(sink_path)
        .map_err(|e| EdgeError::io(sink_path, e))?;
    let mut line = event.to_line();
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(|e| EdgeError::io(sink_path, e))
}

/// Buffered NDJSON writer; the file is truncated on creation so a run's
/// output depends only on its inputs.
pub struct NdjsonSink {
    path: PathBuf,
    out: BufWriter<File>,
    lines: u64,
}

impl NdjsonSink {
    pub fn create(path: &Path) -> Result<Self, EdgeError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| EdgeError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| EdgeError::io(path, e))?;
        Ok(Self {
            path: path.to_owned(),
            out: BufWriter::new(file),
            lines: 0,
        })
    }

    pub fn write_line(&mut self, line: &str) -> Result<(), EdgeError> {
        let path = &self.path;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| EdgeError::io(path, e))?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn finish(mut self) -> Result<u64, EdgeError> {
        self.out.flush().map_err(|e| EdgeError::io(&self.path, e))?;
        Ok(self.lines)
    }
}
