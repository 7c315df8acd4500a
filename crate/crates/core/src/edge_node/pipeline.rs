use std::fs;

use log::{debug, info, warn};
use serde::Serialize;

use super::{
    load_manifest, DeliveryReport, EdgeError, ErrorPayload, Event, EventBody, FrameEntry, MaskPayload,
    NdjsonSink, PipelineConfig, TcpSender,
};
use crate::detection::{AnnotationDetector, DetectorBackend, LabelMapSegmenter, SegmenterBackend};
use crate::distancing::table2_pipeline;
use crate::imgproc::{load_pgm, GrayImage};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub frames: usize,
    pub events: u64,
    /// Distance violations summed over all frames.
    pub violations: usize,
    /// Frames carrying a non-compliant mask event.
    pub mask_violations: usize,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delivery: Option<DeliveryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delivery_error: Option<String>,
}

struct Emitter {
    sink: NdjsonSink,
    tcp: Option<TcpSender>,
    seq: u64,
}

impl Emitter {
    fn emit(&mut self, frame: &FrameEntry, body: EventBody) -> Result<(), EdgeError> {
        let event = Event {
            seq: self.seq,
            frame_id: frame.frame_id.clone(),
            timestamp_ms: frame.timestamp_ms,
            body,
        };
        self.seq += 1;
        let line = event.to_line();
        self.sink.write_line(&line)?;
        if let Some(tcp) = &self.tcp {
            tcp.send_line(line);
        }
        Ok(())
    }

    fn error(&mut self, frame: &FrameEntry, stage: &str, message: String) -> Result<(), EdgeError> {
        warn!("frame {}: {stage} failed: {message}", frame.frame_id);
        self.emit(
            frame,
            EventBody::ErrorEvent(ErrorPayload {
                stage: stage.into(),
                message,
            }),
        )
    }
}

/// Loads the manifest and the annotation/label-map stub backends named in
/// the config, then processes every frame.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, EdgeError> {
    config.validate()?;
    let frames = load_manifest(&config.manifest)?;
    let detector = AnnotationDetector::from_path(&config.annotations).map_err(|e| {
        EdgeError::ConfigInvalid(format!("annotations {}: {e}", config.annotations.display()))
    })?;
    let segmenter = LabelMapSegmenter::from_dir(&config.labelmaps).map_err(|e| {
        EdgeError::ConfigInvalid(format!("labelmaps {}: {e}", config.labelmaps.display()))
    })?;
    run_pipeline_with(config, &frames, &detector, &segmenter)
}

pub(crate) fn load_frame(frame: &FrameEntry) -> Result<GrayImage, String> {
    let bytes = fs::read(&frame.image_path).map_err(|e| format!("{}: {e}", frame.image_path.display()))?;
    load_pgm(&bytes).map_err(|e| format!("{}: {e}", frame.image_path.display()))
}

/// Processes `frames` in order with arbitrary backends. Per-frame failures
/// become error events; only sink I/O aborts the run.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    frames: &[FrameEntry],
    detector: &dyn DetectorBackend,
    segmenter: &dyn SegmenterBackend,
) -> Result<RunSummary, EdgeError> {
    let profile = config.calibration_profile()?;
    let dist_cfg = config.distancing();
    let tcp = match (&config.sink.tcp, config.spool_path()) {
        (Some(tcp), Some(spool)) => Some(TcpSender::spawn(tcp.clone(), &spool)?),
        _ => None,
    };
    let mut out = Emitter {
        sink: NdjsonSink::create(&config.sink.ndjson_path)?,
        tcp,
        seq: 0,
    };
    let mut summary = RunSummary::default();

    for frame in frames {
        summary.frames += 1;
        debug!("frame {}", frame.frame_id);
        let image = match load_frame(frame) {
            Ok(img) => img,
            Err(msg) => {
                summary.errors += 1;
                out.error(frame, "load", msg)?;
                continue;
            }
        };

        match detector.detect(&frame.frame_id, &image) {
            Ok(boxes) => {
                let payload = MaskPayload::from_boxes(&boxes);
                if !payload.compliant {
                    summary.mask_violations += 1;
                }
                out.emit(frame, EventBody::MaskEvent(payload))?;
            }
            Err(e) => {
                summary.errors += 1;
                out.error(frame, "detect", e.to_string())?;
            }
        }

        let map = match segmenter.segment(&frame.frame_id, &image) {
            Ok(map) => map,
            Err(e) => {
                summary.errors += 1;
                out.error(frame, "segment", e.to_string())?;
                continue;
            }
        };
        let person = map.class_mask(config.person_class);
        match table2_pipeline(&person, &profile, config.threshold_m, &dist_cfg, &frame.frame_id) {
            Ok(report) => {
                summary.violations += report.violations;
                out.emit(frame, EventBody::DistanceEvent(report))?;
            }
            Err(e) => {
                summary.errors += 1;
                out.error(frame, "distance", e.to_string())?;
            }
        }
    }

    summary.events = out.sink.finish()?;
    if let Some(tcp) = out.tcp {
        match tcp.finish() {
            Ok(report) => summary.delivery = Some(report),
            Err(EdgeError::EndpointUnreachable { endpoint, report }) => {
                warn!("{endpoint} unreachable; {} events left in spool", report.unsent);
                summary.delivery_error = Some(format!("endpoint {endpoint} unreachable"));
                summary.delivery = Some(report);
            }
            Err(e) => return Err(e),
        }
    }
    info!(
        "processed {} frames: {} events, {} violations, {} errors",
        summary.frames, summary.events, summary.violations, summary.errors
    );
    Ok(summary)
}
