use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EdgeError;
use crate::distancing::{calibrate, CalibrationProfile, DistancingConfig, MorphologyParams, DEFAULT_THRESHOLD_M};
use crate::imgproc::CannyParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub reference_width_px: f64,
    pub reference_width_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcpConfig {
    pub host: String,
    pub port: u16,
    /// Connection attempts per reconnect cycle.
    #[serde(default = "default_retry_max")]
    pub retry_max: u32,
    /// Delay before the second attempt; doubles on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Defaults to `<ndjson_path>.spool`.
    #[serde(default)]
    pub spool_path: Option<PathBuf>,
    /// Recently written events resent after a reconnect, covering lines
    /// lost in socket buffers when the peer went away.
    #[serde(default = "default_replay_window")]
    pub replay_window: usize,
}

fn default_retry_max() -> u32 {
    5
}

fn default_backoff_ms() -> u64 {
    100
}

fn default_replay_window() -> usize {
    4096
}

impl TcpConfig {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        Self {
            host: host.into(),
            port,
            retry_max: default_retry_max(),
            backoff_ms: default_backoff_ms(),
            spool_path: None,
            replay_window: default_replay_window(),
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkConfig {
    pub ndjson_path: PathBuf,
    #[serde(default)]
    pub tcp: Option<TcpConfig>,
}

/// Pipeline configuration. Relative paths resolve against the directory of
/// the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub annotations: PathBuf,
    pub labelmaps: PathBuf,
    pub calibration: Calibration,
    #[serde(default = "default_threshold")]
    pub threshold_m: f64,
    #[serde(default)]
    pub canny: CannyParams,
    #[serde(default)]
    pub morphology: MorphologyParams,
    #[serde(default = "default_min_area")]
    pub min_area: f64,
    /// Label-map id treated as "person".
    #[serde(default = "default_person_class")]
    pub person_class: u8,
    pub sink: SinkConfig,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_M
}

fn default_min_area() -> f64 {
    DistancingConfig::default().min_area
}

fn default_person_class() -> u8 {
    crate::detection::PERSON_CLASS
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, EdgeError> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| EdgeError::ConfigInvalid(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EdgeError> {
        let text = fs::read_to_string(path).map_err(|e| EdgeError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.annotations);
        fix(&mut self.labelmaps);
        fix(&mut self.sink.ndjson_path);
        if let Some(tcp) = &mut self.sink.tcp {
            if let Some(spool) = &mut tcp.spool_path {
                fix(spool);
            }
        }
    }

    pub fn validate(&self) -> Result<(), EdgeError> {
        let invalid = |m: String| EdgeError::ConfigInvalid(m);
        self.calibration_profile()?;
        if !(self.threshold_m > 0.0 && self.threshold_m.is_finite()) {
            return Err(invalid(format!("threshold_m must be positive, got {}", self.threshold_m)));
        }
        if !(self.min_area >= 0.0 && self.min_area.is_finite()) {
            return Err(invalid(format!("min_area must be non-negative, got {}", self.min_area)));
        }
        self.distancing()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if let Some(tcp) = &self.sink.tcp {
            if tcp.retry_max == 0 {
                return Err(invalid("tcp.retry_max must be at least 1".into()));
            }
            if tcp.host.is_empty() {
                return Err(invalid("tcp.host must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn calibration_profile(&self) -> Result<CalibrationProfile, EdgeError> {
        calibrate(self.calibration.reference_width_px, self.calibration.reference_width_m)
            .map_err(|e| EdgeError::ConfigInvalid(e.to_string()))
    }

    pub fn distancing(&self) -> DistancingConfig {
        DistancingConfig {
            canny: self.canny,
            morphology: self.morphology,
            min_area: self.min_area,
        }
    }

    pub fn spool_path(&self) -> Option<PathBuf> {
        let tcp = self.sink.tcp.as_ref()?;
        Some(tcp.spool_path.clone().unwrap_or_else(|| {
            let mut p = self.sink.ndjson_path.clone().into_os_string();
            p.push(".spool");
            PathBuf::from(p)
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: String,
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

/// Reads a JSON array of frames; image paths resolve against the manifest's
/// directory and frame ids must be unique.
pub fn load_manifest(path: &Path) -> Result<Vec<FrameEntry>, EdgeError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            EdgeError::ManifestMissing(path.to_owned())
        } else {
            EdgeError::io(path, e)
        }
    })?;
    let mut frames: Vec<FrameEntry> =
        serde_json::from_str(&text).map_err(|e| EdgeError::ManifestInvalid(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    for f in &mut frames {
        if !seen.insert(f.frame_id.clone()) {
            return Err(EdgeError::ManifestInvalid(format!("duplicate frame_id {:?}", f.frame_id)));
        }
        if f.image_path.is_relative() {
            f.image_path = base.join(&f.image_path);
        }
    }
    Ok(frames)
}
