//! The runnable edge pipeline: manifest frames flow through detection,
//! segmentation and distancing, and the resulting events are written to a
//! local NDJSON sink and optionally streamed to a TCP collector.

mod collector;
mod config;
mod event;
mod pipeline;
mod transport;

pub use collector::{serve_collector, CollectorHandle, CollectorStats, MAX_LINE_BYTES};
pub use config::{load_manifest, Calibration, FrameEntry, PipelineConfig, SinkConfig, TcpConfig};
pub use event::{
    emit_ndjson, BoxGeometry, ErrorPayload, Event, EventBody, EventKind, MaskDetection, MaskPayload,
    NdjsonSink,
};
pub use pipeline::{run_pipeline, run_pipeline_with, RunSummary};
pub use transport::{send_tcp, DeliveryReport, TcpSender};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("manifest not found: {}", .0.display())]
    ManifestMissing(PathBuf),
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("endpoint {endpoint} unreachable; {} events left in spool", report.unsent)]
    EndpointUnreachable {
        endpoint: String,
        report: DeliveryReport,
    },
    #[error(transparent)]
    Detection(#[from] crate::detection::DetectionError),
}

impl EdgeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
