//! Throughput/latency harness for the mask-to-report pipeline, synthetic
//! scenes to drive it, and loaders for published benchmark tables.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{LabelMapSegmenter, SegmenterBackend};
use crate::distancing::{table2_pipeline, CalibrationProfile, DistancingConfig};
use crate::edge_node::{load_manifest, PipelineConfig};
use crate::imgproc::{load_pgm, BinaryMask};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("malformed fixture row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub frames: u64,
    pub wall_ms: f64,
    pub fps: f64,
    pub latency_p50: f64,
    pub latency_p95: f64,
    pub latency_p99: f64,
}

/// Nearest-rank percentile of ascending `sorted`.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl TimingReport {
    pub fn from_latencies(latencies: &[Duration], wall: Duration) -> Self {
        let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let wall_ms = wall.as_secs_f64() * 1e3;
        let frames = ms.len() as u64;
        let fps = if frames == 0 {
            0.0
        } else {
            // Guard against a zero-resolution clock reading.
            frames as f64 / wall.as_secs_f64().max(1e-9)
        };
        Self {
            frames,
            wall_ms,
            fps,
            latency_p50: nearest_rank(&ms, 50.0),
            latency_p95: nearest_rank(&ms, 95.0),
            latency_p99: nearest_rank(&ms, 99.0),
        }
    }
}

/// Times the Canny → morphology → contours → rectangles → distances path
/// over `frames`, after one untimed warm-up pass.
pub fn measure_masks(
    frames: &[(String, BinaryMask)],
    profile: &CalibrationProfile,
    threshold_m: f64,
    config: &DistancingConfig,
    repetitions: u32,
) -> Result<TimingReport, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::ConfigInvalid("repetitions must be at least 1".into()));
    }
    let run = |id: &str, mask: &BinaryMask| {
        table2_pipeline(mask, profile, threshold_m, config, id)
            .map_err(|e| BenchError::ConfigInvalid(e.to_string()))
    };
    for (id, mask) in frames {
        std::hint::black_box(run(id, mask)?);
    }
    let mut latencies = Vec::with_capacity(frames.len() * repetitions as usize);
    let start = Instant::now();
    for _ in 0..repetitions {
        for (id, mask) in frames {
            let t = Instant::now();
            std::hint::black_box(run(id, mask)?);
            latencies.push(t.elapsed());
        }
    }
    Ok(TimingReport::from_latencies(&latencies, start.elapsed()))
}

/// Benchmarks the manifest of `config`. Frame loading and segmentation
/// happen up front and are not timed.
pub fn measure_pipeline(config: &PipelineConfig, repetitions: u32) -> Result<TimingReport, BenchError> {
    let invalid = |e: &dyn std::fmt::Display| BenchError::ConfigInvalid(e.to_string());
    config.validate().map_err(|e| invalid(&e))?;
    let profile = config.calibration_profile().map_err(|e| invalid(&e))?;
    let frames = load_manifest(&config.manifest).map_err(|e| invalid(&e))?;
    let segmenter = LabelMapSegmenter::from_dir(&config.labelmaps).map_err(|e| invalid(&e))?;
    let mut masks = Vec::with_capacity(frames.len());
    for frame in &frames {
        let bytes = fs::read(&frame.image_path).map_err(|source| BenchError::Io {
            path: frame.image_path.clone(),
            source,
        })?;
        let image = load_pgm(&bytes).map_err(|e| invalid(&format!("frame {}: {e}", frame.frame_id)))?;
        let map = segmenter
            .segment(&frame.frame_id, &image)
            .map_err(|e| invalid(&format!("frame {}: {e}", frame.frame_id)))?;
        masks.push((frame.frame_id.clone(), map.class_mask(config.person_class)));
    }
    measure_masks(&masks, &profile, config.threshold_m, &config.distancing(), repetitions)
}

/// Person mask with up to `people` non-touching upright rectangles.
pub fn synthetic_person_mask(seed: u64, width: u32, height: u32, people: usize) -> BinaryMask {
    const GAP: i64 = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = BinaryMask::empty(width, height);
    let mut placed: Vec<(i64, i64, i64, i64)> = Vec::new();
    let (w, h) = (width as i64, height as i64);
    for _ in 0..people * 20 {
        if placed.len() == people {
            break;
        }
        let bw = rng.gen_range(16..=48).min(w - 2);
        let bh = rng.gen_range(40..=120).min(h - 2);
        if bw < 1 || bh < 1 {
            break;
        }
        let x = rng.gen_range(1..=w - bw - 1);
        let y = rng.gen_range(1..=h - bh - 1);
        let clear = placed.iter().all(|&(px, py, pw, ph)| {
            x + bw + GAP <= px || px + pw + GAP <= x || y + bh + GAP <= py || py + ph + GAP <= y
        });
        if clear {
            placed.push((x, y, bw, bh));
            mask.fill_rect(x, y, bw as u32, bh as u32);
        }
    }
    mask
}

/// One row of a published benchmark table; absent cells are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub model: String,
    pub train_iter_s: Option<f64>,
    pub inf_fps: Option<f64>,
    pub mem_gb: Option<f64>,
    pub ap_box: Option<f64>,
    pub ap_mask: Option<f64>,
    pub map_pct: Option<f64>,
    pub miou: Option<f64>,
    pub params_m: Option<f64>,
    pub realtime: Option<bool>,
}

pub const METRICS: [&str; 8] = [
    "train_iter_s",
    "inf_fps",
    "mem_gb",
    "ap_box",
    "ap_mask",
    "map_pct",
    "miou",
    "params_m",
];

const COLUMNS: [&str; 10] = [
    "model",
    "train_iter_s",
    "inf_fps",
    "mem_gb",
    "ap_box",
    "ap_mask",
    "map_pct",
    "miou",
    "params_m",
    "realtime",
];

impl FixtureRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metric_slot(name).and_then(|v| *v)
    }

    fn metric_slot(&self, name: &str) -> Option<&Option<f64>> {
        Some(match name {
            "train_iter_s" => &self.train_iter_s,
            "inf_fps" => &self.inf_fps,
            "mem_gb" => &self.mem_gb,
            "ap_box" => &self.ap_box,
            "ap_mask" => &self.ap_mask,
            "map_pct" => &self.map_pct,
            "miou" => &self.miou,
            "params_m" => &self.params_m,
            _ => return None,
        })
    }

    fn metric_mut(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match name {
            "train_iter_s" => &mut self.train_iter_s,
            "inf_fps" => &mut self.inf_fps,
            "mem_gb" => &mut self.mem_gb,
            "ap_box" => &mut self.ap_box,
            "ap_mask" => &mut self.ap_mask,
            "map_pct" => &mut self.map_pct,
            "miou" => &mut self.miou,
            "params_m" => &mut self.params_m,
            _ => return None,
        })
    }

    pub fn has_metric(&self) -> bool {
        self.realtime.is_some() || METRICS.iter().any(|m| self.metric(m).is_some())
    }
}

fn absent(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "-"
}

/// Parses fixture CSV. The header names any subset of the record fields
/// (`model` is required); `-` or an empty cell means absent.
pub fn parse_fixtures(reader: impl Read) -> Result<Vec<FixtureRecord>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for h in &headers {
        if !COLUMNS.contains(&h.trim()) {
            return Err(BenchError::MalformedRow {
                line: 1,
                reason: format!("unknown column {h:?}"),
            });
        }
    }
    if !headers.iter().any(|h| h.trim() == "model") {
        return Err(BenchError::MalformedRow {
            line: 1,
            reason: "missing model column".into(),
        });
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| BenchError::MalformedRow { line, reason };
        let mut rec = FixtureRecord::default();
        for (col, cell) in headers.iter().zip(row.iter()) {
            let col = col.trim();
            match col {
                "model" => rec.model = cell.to_owned(),
                "realtime" if !absent(cell) => {
                    rec.realtime = Some(match cell.trim().to_ascii_lowercase().as_str() {
                        "yes" | "true" => true,
                        "no" | "false" => false,
                        other => return Err(bad(format!("realtime must be Yes/No, got {other:?}"))),
                    })
                }
                "realtime" => {}
                metric if !absent(cell) => {
                    let v: f64 = cell
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("{metric}: {cell:?} is not a number")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("{metric}: {cell:?} is not finite")));
                    }
                    *rec.metric_mut(metric).expect("column names checked") = Some(v);
                }
                _ => {}
            }
        }
        if !rec.has_metric() {
            return Err(bad(format!("row for {:?} has no metric", rec.model)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_fixtures(path: &Path) -> Result<Vec<FixtureRecord>, BenchError> {
    let file = File::open(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_fixtures(file)
}

/// Writes records with every column; absent values become `-`.
pub fn write_fixtures(records: &[FixtureRecord], writer: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for rec in records {
        let mut row = vec![rec.model.clone()];
        for m in METRICS {
            row.push(rec.metric(m).map_or_else(|| "-".to_owned(), |v| v.to_string()));
        }
        row.push(match rec.realtime {
            Some(true) => "Yes".into(),
            Some(false) => "No".into(),
            None => "-".into(),
        });
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

/// Records carrying `metric`, best first; ties keep input order.
pub fn rank_fixtures(records: &[FixtureRecord], metric: &str) -> Result<Vec<FixtureRecord>, BenchError> {
    if !METRICS.contains(&metric) {
        return Err(BenchError::UnknownMetric(metric.to_owned()));
    }
    let mut ranked: Vec<FixtureRecord> = records
        .iter()
        .filter(|r| r.metric(metric).is_some())
        .cloned()
        .collect();
    ranked.sort_by(|a, b| {
        let (a, b) = (a.metric(metric).unwrap(), b.metric(metric).unwrap());
        b.total_cmp(&a)
    });
    Ok(ranked)
}
