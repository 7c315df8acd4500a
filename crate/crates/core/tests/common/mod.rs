//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use edgetrace_core::detection::DetBox;
use edgetrace_core::imgproc::{dilate, BinaryMask, StructuringElement};
use rand::Rng;

pub type PixelSet = BTreeSet<(u32, u32)>;

/// 8-connected components by breadth-first flood fill.
pub fn components_8(mask: &BinaryMask) -> Vec<PixelSet> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as u32, y as u32) || seen.contains(&(x, y)) {
                continue;
            }
            let mut comp = PixelSet::new();
            let mut queue = VecDeque::from([(x, y)]);
            seen.insert((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                comp.insert((cx as u32, cy as u32));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if mask.get_or_background(nx, ny) && seen.insert((nx, ny)) {
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Boundary pixels of one component: its pixels that have a 4-neighbour in
/// the background region reachable from outside the frame (4-connected,
/// with every other pixel treated as background). Pixels on the frame edge
/// qualify because the out-of-frame ring belongs to that region.
pub fn outer_boundary(comp: &PixelSet) -> PixelSet {
    // Everything beyond the component's bounding box is background and
    // connected to the out-of-frame ring, so flooding the box grown by one
    // pixel on each side is enough.
    let x0 = comp.iter().map(|p| i64::from(p.0)).min().unwrap_or(0) - 1;
    let y0 = comp.iter().map(|p| i64::from(p.1)).min().unwrap_or(0) - 1;
    let x1 = comp.iter().map(|p| i64::from(p.0)).max().unwrap_or(0) + 1;
    let y1 = comp.iter().map(|p| i64::from(p.1)).max().unwrap_or(0) + 1;
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let idx = |x: i64, y: i64| ((y - y0) * bw + (x - x0)) as usize;
    let mut fg = vec![false; (bw * bh) as usize];
    for &(x, y) in comp {
        fg[idx(i64::from(x), i64::from(y))] = true;
    }
    let mut outside = vec![false; fg.len()];
    let mut queue = VecDeque::from([(x0, y0)]);
    outside[idx(x0, y0)] = true;
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < x0 || ny < y0 || nx > x1 || ny > y1 {
                continue;
            }
            let i = idx(nx, ny);
            if !fg[i] && !outside[i] {
                outside[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    comp.iter()
        .copied()
        .filter(|&(x, y)| {
            let (px, py) = (i64::from(x), i64::from(y));
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dx, dy)| outside[idx(px + dx, py + dy)])
        })
        .collect()
}

/// Morphology by definition: dilation gathers `p - b`, erosion needs every `p + b`.
pub fn naive_dilate(mask: &BinaryMask, offsets: &[(i64, i64)]) -> BinaryMask {
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let hit = offsets
                .iter()
                .any(|(dx, dy)| mask.get_or_background(i64::from(x) - dx, i64::from(y) - dy));
            out.set(x, y, hit);
        }
    }
    out
}

pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32, density: f64) -> BinaryMask {
    let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    BinaryMask::new(w, h, bits).unwrap()
}

/// Odd-sized (up to 5×5) random structuring element with its centre set.
pub fn random_se(rng: &mut impl Rng) -> StructuringElement {
    let w = 2 * rng.gen_range(0..3) + 1;
    let h = 2 * rng.gen_range(0..3) + 1;
    let mut bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.5)).collect();
    bits[(h / 2 * w + w / 2) as usize] = true;
    StructuringElement::new(w, h, bits).unwrap()
}

/// Erosion via duality: pad with background, complement (the padding turns
/// into foreground), dilate with the reflected element, complement, crop.
pub fn erode_by_duality(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let r = se.width().max(se.height());
    let (w, h) = (mask.width(), mask.height());
    let mut padded = BinaryMask::filled(w + 2 * r, h + 2 * r, true);
    for (x, y) in mask.foreground() {
        padded.set(x + r, y + r, false);
    }
    let grown = dilate(&padded, &se.reflect());
    let mut out = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, !grown.get(x + r, y + r));
        }
    }
    out
}

/// Minimum enclosing-rectangle area by brute force: every pair of points
/// with all others on one side is a hull edge; try each edge direction.
pub fn min_rect_area_oracle(pts: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    let n = pts.len();
    for i in 0..n {
        for j in 0..n {
            let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
            let len = dx.hypot(dy);
            if len == 0.0 {
                continue;
            }
            let side = |k: usize| dx * (pts[k].1 - pts[i].1) - dy * (pts[k].0 - pts[i].0);
            if !(0..n).all(|k| side(k) >= -1e-9 * len) {
                continue;
            }
            let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for k in 0..n {
                let (ex, ey) = (pts[k].0 - pts[i].0, pts[k].1 - pts[i].1);
                let u = (ex * dx + ey * dy) / len;
                let v = side(k) / len;
                lo_u = lo_u.min(u);
                hi_u = hi_u.max(u);
                lo_v = lo_v.min(v);
                hi_v = hi_v.max(v);
            }
            best = best.min((hi_u - lo_u) * (hi_v - lo_v));
        }
    }
    if best.is_infinite() {
        0.0
    } else {
        best
    }
}

/// IoU by counting unit pixels of integer boxes.
pub fn raster_iou(a: &DetBox, b: &DetBox) -> f64 {
    let inside = |d: &DetBox, x: i64, y: i64| {
        (x as f64) >= d.x && (x as f64) < d.x + d.w && (y as f64) >= d.y && (y as f64) < d.y + d.h
    };
    let lo = a.x.min(b.x).min(a.y).min(b.y).floor() as i64;
    let hi = (a.x + a.w).max(b.x + b.w).max(a.y + a.h).max(b.y + b.h).ceil() as i64;
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo..hi {
        for x in lo..hi {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Step-by-step PR curve: rank, match, tabulate precision/recall, pad with
/// sentinels, sweep the envelope right to left and sum rectangles wherever
/// recall changes.
pub fn ap_oracle(dets: &[DetBox], gts: &[DetBox], thr: f64) -> f64 {
    if gts.is_empty() {
        return if dets.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap());
    let mut used = vec![false; gts.len()];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut rec = vec![0.0];
    let mut prec = vec![0.0];
    for &i in &order {
        let mut best = None;
        let mut best_iou = -1.0;
        for (g, gt) in gts.iter().enumerate() {
            let v = raster_iou(&dets[i], gt);
            if !used[g] && v >= thr && v > best_iou {
                best = Some(g);
                best_iou = v;
            }
        }
        match best {
            Some(g) => {
                used[g] = true;
                tp += 1.0;
            }
            None => fp += 1.0,
        }
        rec.push(tp / gts.len() as f64);
        prec.push(tp / (tp + fp));
    }
    rec.push(1.0);
    prec.push(0.0);
    for k in (0..prec.len() - 1).rev() {
        prec[k] = prec[k].max(prec[k + 1]);
    }
    (1..rec.len())
        .filter(|&k| rec[k] != rec[k - 1])
        .map(|k| (rec[k] - rec[k - 1]) * prec[k])
        .sum()
}

/// On-disk pipeline fixture: three 320×240 frames whose stub annotations
/// hold 2, 0 and 1 boxes and whose label maps hold 2, 1 and 3 people.
pub mod scenario {
    use std::fs;
    use std::path::{Path, PathBuf};

    use edgetrace_core::imgproc::{encode_pgm, GrayImage};

    pub const FRAME_IDS: [&str; 3] = ["f0", "f1", "f2"];

    fn label_map(squares: &[(u32, u32)]) -> GrayImage {
        let mut img = GrayImage::filled(320, 240, 0);
        for &(x0, y0) in squares {
            for y in y0..y0 + 30 {
                for x in x0..x0 + 30 {
                    img.set(x, y, 1);
                }
            }
        }
        img
    }

    /// Writes the fixture into `dir` and returns the config path. Frames in
    /// `skip_labelmaps` get no label map; `tcp` is spliced into the sink.
    pub fn write(dir: &Path, skip_labelmaps: &[&str], tcp: Option<String>) -> PathBuf {
        let maps = dir.join("labelmaps");
        fs::create_dir_all(&maps).unwrap();
        fs::create_dir_all(dir.join("frames")).unwrap();
        let people: [&[(u32, u32)]; 3] = [
            &[(40, 100), (100, 100)],
            &[(150, 50)],
            &[(20, 20), (200, 20), (240, 150)],
        ];
        let mut manifest = Vec::new();
        for (i, id) in FRAME_IDS.iter().enumerate() {
            let frame = GrayImage::filled(320, 240, 40 + i as u8);
            fs::write(dir.join(format!("frames/{id}.pgm")), encode_pgm(&frame)).unwrap();
            if !skip_labelmaps.contains(id) {
                fs::write(maps.join(format!("{id}.pgm")), encode_pgm(&label_map(people[i]))).unwrap();
            }
            manifest.push(format!(
                r#"{{"frame_id":"{id}","image_path":"frames/{id}.pgm","timestamp_ms":{}}}"#,
                1000 + 40 * i
            ));
        }
        fs::write(dir.join("manifest.json"), format!("[{}]", manifest.join(","))).unwrap();
        fs::write(
            dir.join("annotations.ndjson"),
            concat!(
                r#"{"frame_id":"f0","boxes":[{"x":40,"y":90,"w":30,"h":40,"score":0.92,"class":"with-mask"},{"x":100,"y":90,"w":30,"h":40,"score":0.81,"class":"with-mask"}]}"#,
                "\n",
                r#"{"frame_id":"f1","boxes":[]}"#,
                "\n",
                r#"{"frame_id":"f2","boxes":[{"x":20,"y":10,"w":30,"h":40,"score":0.77,"class":"without-mask"}]}"#,
                "\n"
            ),
        )
        .unwrap();
        let tcp = tcp.map(|t| format!(r#", "tcp": {t}"#)).unwrap_or_default();
        let config = format!(
            r#"{{
  "manifest": "manifest.json",
  "annotations": "annotations.ndjson",
  "labelmaps": "labelmaps",
  "calibration": {{"reference_width_px": 100, "reference_width_m": 0.5}},
  "threshold_m": 2.0,
  "sink": {{"ndjson_path": "out/events.ndjson"{tcp}}}
}}"#
        );
        let path = dir.join("config.json");
        fs::write(&path, config).unwrap();
        path
    }
}
