use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use edgetrace_core::bench::measure_pipeline;
use edgetrace_core::detection::{evaluate, miou, FrameAnnotation, FrameDetections, SegmentationMap};
use edgetrace_core::distancing::{calibrate, table2_pipeline, DistancingConfig, DEFAULT_THRESHOLD_M};
use edgetrace_core::edge_node::{run_pipeline, serve_collector, PipelineConfig};
use edgetrace_core::imgproc::{load_pgm, GrayImage};
use serde::Serialize;

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "edgetrace", version, about = "Edge social-distancing pipeline and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the frame pipeline described by a JSON config
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score one person mask (PGM, non-zero = person) and print the report
    Distance {
        #[arg(long)]
        mask: PathBuf,
        /// Reference object width in pixels
        #[arg(long = "ref-px")]
        ref_px: f64,
        /// Reference object width in metres
        #[arg(long = "ref-m")]
        ref_m: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_M)]
        threshold: f64,
    },
    /// Per-class AP and mAP of detections against ground truth (NDJSON)
    EvalMap {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gts: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Mean IoU of two label maps (PGM, pixel value = class id)
    EvalMiou {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        classes: usize,
    },
    /// Time the geometric pipeline over the config's manifest
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        repetitions: u32,
    },
    /// Receive NDJSON events over TCP and append them to a file
    Collect {
        #[arg(long)]
        bind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Pipeline { config } => pipeline_cmd(&config),
        Command::Distance {
            mask,
            ref_px,
            ref_m,
            threshold,
        } => distance_cmd(&mask, ref_px, ref_m, threshold),
        Command::EvalMap { dets, gts, iou } => eval_map_cmd(&dets, &gts, iou),
        Command::EvalMiou { pred, gt, classes } => eval_miou_cmd(&pred, &gt, classes),
        Command::Bench { config, repetitions } => bench_cmd(&config, repetitions),
        Command::Collect { bind, out } => collect_cmd(&bind, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_json(value: &impl Serialize) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_pgm(path: &Path) -> Result<GrayImage, Box<dyn Error>> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(load_pgm(&bytes).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn read_labels(path: &Path) -> Result<SegmentationMap, Box<dyn Error>> {
    let img = read_pgm(path)?;
    let (w, h) = (img.width(), img.height());
    Ok(SegmentationMap::new(w, h, img.into_data())?)
}

fn pipeline_cmd(config: &Path) -> CliResult {
    let cfg = PipelineConfig::load(config)?;
    let summary = run_pipeline(&cfg)?;
    print_json(&summary)?;
    match summary.delivery_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn distance_cmd(mask: &Path, ref_px: f64, ref_m: f64, threshold: f64) -> CliResult {
    let img = read_pgm(mask)?;
    let profile = calibrate(ref_px, ref_m)?;
    let frame_id = mask
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mask");
    let report = table2_pipeline(&img.threshold(0), &profile, threshold, &DistancingConfig::default(), frame_id)?;
    print_json(&report)
}

fn eval_map_cmd(dets: &Path, gts: &Path, iou: f64) -> CliResult {
    let frames = FrameDetections::pair_by_frame(FrameAnnotation::load(dets)?, FrameAnnotation::load(gts)?);
    print_json(&evaluate(&frames, iou)?)
}

fn eval_miou_cmd(pred: &Path, gt: &Path, classes: usize) -> CliResult {
    let value = miou(&read_labels(pred)?, &read_labels(gt)?, classes)?;
    println!("{}", serde_json::to_string(&value)?);
    Ok(())
}

fn bench_cmd(config: &Path, repetitions: u32) -> CliResult {
    let cfg = PipelineConfig::load(config)?;
    print_json(&measure_pipeline(&cfg, repetitions)?)
}

fn collect_cmd(bind: &str, out: &Path) -> CliResult {
    let handle = serve_collector(bind, out)?;
    println!("listening on {}", handle.local_addr());
    std::io::stdout().flush()?;
    handle.wait();
    Ok(())
}
