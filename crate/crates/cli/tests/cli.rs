use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use edgetrace_core::imgproc::{encode_pgm, GrayImage};
use serde_json::Value;

fn edgetrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgetrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn square_image(w: u32, h: u32, squares: &[(u32, u32, u32, u8)]) -> GrayImage {
    let mut img = GrayImage::filled(w, h, 0);
    for &(x0, y0, side, value) in squares {
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                img.set(x, y, value);
            }
        }
    }
    img
}

fn write_pgm(path: &Path, img: &GrayImage) -> String {
    fs::write(path, encode_pgm(img)).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Two-frame scenario on disk; returns the config path.
fn write_scenario(dir: &Path, labelmaps: bool) -> PathBuf {
    fs::create_dir_all(dir.join("frames")).unwrap();
    fs::create_dir_all(dir.join("labelmaps")).unwrap();
    for (i, id) in ["a", "b"].iter().enumerate() {
        write_pgm(&dir.join(format!("frames/{id}.pgm")), &GrayImage::filled(320, 240, 60));
        if labelmaps {
            let map = square_image(320, 240, &[(20 + 40 * i as u32, 100, 30, 1), (200, 100, 30, 1)]);
            write_pgm(&dir.join(format!("labelmaps/{id}.pgm")), &map);
        }
    }
    fs::write(
        dir.join("manifest.json"),
        r#"[{"frame_id":"a","image_path":"frames/a.pgm"},{"frame_id":"b","image_path":"frames/b.pgm"}]"#,
    )
    .unwrap();
    fs::write(
        dir.join("annotations.ndjson"),
        "{\"frame_id\":\"a\",\"boxes\":[{\"x\":20,\"y\":90,\"w\":30,\"h\":40,\"score\":0.9,\"class\":\"with-mask\"}]}\n",
    )
    .unwrap();
    let config = dir.join("config.json");
    fs::write(
        &config,
        r#"{
  "manifest": "manifest.json",
  "annotations": "annotations.ndjson",
  "labelmaps": "labelmaps",
  "calibration": {"reference_width_px": 100, "reference_width_m": 0.5},
  "sink": {"ndjson_path": "out/events.ndjson"}
}"#,
    )
    .unwrap();
    config
}

#[test]
fn distance_reports_metric_gap() {
    let dir = tempfile::tempdir().unwrap();
    // Squares 300 px apart at 200 px/m.
    let mask = square_image(640, 480, &[(150, 220, 40, 255), (450, 220, 40, 255)]);
    let path = write_pgm(&dir.path().join("scene.pgm"), &mask);
    let out = edgetrace(&["distance", "--mask", &path, "--ref-px", "100", "--ref-m", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["frame_id"], "scene");
    assert_eq!(report["object_count"], 2);
    assert_eq!(report["violations"], 1);
    let d = report["pairs"][0]["metric_distance"].as_f64().unwrap();
    assert!((d - 1.5).abs() <= 1.5 * 0.02, "{d}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(edgetrace(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(edgetrace(&["distance", "--mask", "x.pgm"]).status.code(), Some(1));
    assert_eq!(edgetrace(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = edgetrace(&["pipeline", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"manifest": 3}"#).unwrap();
    assert_eq!(edgetrace(&["pipeline", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let out = edgetrace(&["distance", "--mask", missing.to_str().unwrap(), "--ref-px", "1", "--ref-m", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_miou_identical_maps_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let map = square_image(64, 48, &[(5, 5, 10, 1), (30, 20, 12, 2)]);
    let path = write_pgm(&dir.path().join("map.pgm"), &map);
    let out = edgetrace(&["eval-miou", "--pred", &path, "--gt", &path, "--classes", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0");
}

#[test]
fn eval_map_perfect_detections() {
    let dir = tempfile::tempdir().unwrap();
    let records = concat!(
        "{\"frame_id\":\"a\",\"boxes\":[{\"x\":0,\"y\":0,\"w\":10,\"h\":10,\"score\":1.0,\"class\":\"person\"},",
        "{\"x\":50,\"y\":50,\"w\":20,\"h\":30,\"score\":1.0,\"class\":\"with-mask\"}]}\n",
        "{\"frame_id\":\"b\",\"boxes\":[{\"x\":5,\"y\":5,\"w\":8,\"h\":8,\"score\":1.0,\"class\":\"without-mask\"}]}\n",
    );
    let path = dir.path().join("boxes.ndjson");
    fs::write(&path, records).unwrap();
    let p = path.to_str().unwrap();
    let out = edgetrace(&["eval-map", "--dets", p, "--gts", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = stdout_json(&out);
    assert_eq!(result["map"].as_f64(), Some(1.0));
    for class in ["person", "with-mask", "without-mask"] {
        assert_eq!(result["per_class_ap"][class].as_f64(), Some(1.0), "{class}");
    }
}

#[test]
fn pipeline_prints_summary_and_writes_events() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), true);
    let out = edgetrace(&["pipeline", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["frames"], 2);
    assert_eq!(summary["events"], 4);
    assert_eq!(summary["errors"], 0);
    let events = fs::read_to_string(dir.path().join("out/events.ndjson")).unwrap();
    assert_eq!(events.lines().count(), 4);
}

#[test]
fn pipeline_with_missing_label_maps_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), false);
    let out = edgetrace(&["pipeline", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["errors"], 2);
}

#[test]
fn bench_prints_timing_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_scenario(dir.path(), true);
    let out = edgetrace(&["bench", "--config", config.to_str().unwrap(), "--repetitions", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["frames"], 4);
    assert!(report["fps"].as_f64().unwrap() > 0.0);
    let p50 = report["latency_p50"].as_f64().unwrap();
    let p99 = report["latency_p99"].as_f64().unwrap();
    assert!(p50 <= p99);
    assert_eq!(
        edgetrace(&["bench", "--config", config.to_str().unwrap(), "--repetitions", "0"]).status.code(),
        Some(1)
    );
}

#[test]
fn collect_stores_received_events() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.ndjson");
    let mut child = Command::new(env!("CARGO_BIN_EXE_edgetrace"))
        .args(["collect", "--bind", "127.0.0.1:0", "--out", log.to_str().unwrap()])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listen line").to_owned();

    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.write_all(b"{\"seq\":0}\nnot json\n{\"seq\":1}\n").unwrap();
    stream.shutdown(std::net::Shutdown::Write).unwrap();
    // Collector closes its side once it has consumed the stream.
    let mut rest = Vec::new();
    std::io::Read::read_to_end(&mut stream, &mut rest).unwrap();

    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(fs::read_to_string(&log).unwrap(), "{\"seq\":0}\n{\"seq\":1}\n");
}
