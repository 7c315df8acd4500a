use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DetBox, DetectionError, FrameAnnotation, SegmentationMap};

/// Intersection over union of two axis-aligned boxes.
pub fn iou(a: &DetBox, b: &DetBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

fn check_threshold(t: f64) -> Result<(), DetectionError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(DetectionError::BadThreshold(t))
    }
}

/// Indices ordered by descending score; ties keep input order.
fn by_score(boxes: &[DetBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[j].score.total_cmp(&boxes[i].score));
    order
}

/// Per-class greedy non-maximum suppression. Survivors are returned in
/// input order.
pub fn nms(boxes: &[DetBox], iou_threshold: f64) -> Result<Vec<DetBox>, DetectionError> {
    check_threshold(iou_threshold)?;
    let order = by_score(boxes);
    let mut suppressed = vec![false; boxes.len()];
    let mut keep = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[rank + 1..] {
            if !suppressed[j]
                && boxes[j].class == boxes[i].class
                && iou(&boxes[i], &boxes[j]) > iou_threshold
            {
                suppressed[j] = true;
            }
        }
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| boxes[i]).collect())
}

/// All-points interpolated AP over one or more images of a single class.
///
/// Detections are ranked by score across all images; each is matched to the
/// unmatched ground truth of its own image with the highest IoU at or above
/// the threshold. Each true positive adds `1/n_gt` recall at the precision
/// envelope value of its rank.
fn ap_over_images(images: &[(&[DetBox], &[DetBox])], iou_threshold: f64) -> f64 {
    let n_gt: usize = images.iter().map(|(_, g)| g.len()).sum();
    let mut ranked: Vec<(usize, &DetBox)> = images
        .iter()
        .enumerate()
        .flat_map(|(img, (dets, _))| dets.iter().map(move |d| (img, d)))
        .collect();
    if n_gt == 0 {
        return if ranked.is_empty() { 1.0 } else { 0.0 };
    }
    ranked.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));

    let mut matched: Vec<Vec<bool>> = images.iter().map(|(_, g)| vec![false; g.len()]).collect();
    let mut is_tp = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, (img, det)) in ranked.iter().enumerate() {
        let gts = images[*img].1;
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[*img][g] {
                continue;
            }
            let v = iou(det, gt);
            if v >= iou_threshold && best.map_or(true, |(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            matched[*img][g] = true;
            tp += 1;
        }
        is_tp.push(best.is_some());
        precision.push(tp as f64 / (k + 1) as f64);
    }

    let mut envelope = 0.0f64;
    let mut sum = 0.0;
    for k in (0..ranked.len()).rev() {
        envelope = envelope.max(precision[k]);
        if is_tp[k] {
            sum += envelope;
        }
    }
    sum / n_gt as f64
}

/// AP for a single image; `dets` and `gts` are assumed to share a class.
pub fn average_precision(dets: &[DetBox], gts: &[DetBox], iou_threshold: f64) -> f64 {
    ap_over_images(&[(dets, gts)], iou_threshold)
}

/// Arithmetic mean of per-class APs.
pub fn mean_ap<K>(results: &BTreeMap<K, f64>) -> Result<f64, DetectionError> {
    if results.is_empty() {
        return Err(DetectionError::EmptyInput);
    }
    Ok(results.values().sum::<f64>() / results.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_class_ap: BTreeMap<String, f64>,
    #[serde(rename = "map")]
    pub map_value: f64,
}

/// Detections and ground truth for one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameDetections {
    pub dets: Vec<DetBox>,
    pub gts: Vec<DetBox>,
}

/// Per-class AP and mAP over every class occurring in detections or ground
/// truth.
pub fn evaluate(frames: &[FrameDetections], iou_threshold: f64) -> Result<EvalResult, DetectionError> {
    check_threshold(iou_threshold)?;
    let classes: BTreeSet<_> = frames
        .iter()
        .flat_map(|f| f.dets.iter().chain(&f.gts).map(|b| b.class))
        .collect();
    let mut per_class_ap = BTreeMap::new();
    for class in classes {
        let split: Vec<(Vec<DetBox>, Vec<DetBox>)> = frames
            .iter()
            .map(|f| {
                (
                    f.dets.iter().filter(|b| b.class == class).copied().collect(),
                    f.gts.iter().filter(|b| b.class == class).copied().collect(),
                )
            })
            .collect();
        let views: Vec<(&[DetBox], &[DetBox])> =
            split.iter().map(|(d, g)| (d.as_slice(), g.as_slice())).collect();
        per_class_ap.insert(class.to_string(), ap_over_images(&views, iou_threshold));
    }
    let map_value = mean_ap(&per_class_ap)?;
    Ok(EvalResult {
        per_class_ap,
        map_value,
    })
}

impl FrameDetections {
    /// Joins detection and ground-truth annotation files by frame id.
    pub fn pair_by_frame(dets: Vec<FrameAnnotation>, gts: Vec<FrameAnnotation>) -> Vec<FrameDetections> {
        let mut frames: BTreeMap<String, FrameDetections> = BTreeMap::new();
        for rec in dets {
            frames.entry(rec.frame_id).or_default().dets.extend(rec.boxes);
        }
        for rec in gts {
            frames.entry(rec.frame_id).or_default().gts.extend(rec.boxes);
        }
        frames.into_values().collect()
    }
}

/// Mean IoU over the classes present in either map.
pub fn miou(pred: &SegmentationMap, gt: &SegmentationMap, num_classes: usize) -> Result<f64, DetectionError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(DetectionError::DimensionMismatch {
            want_w: gt.width(),
            want_h: gt.height(),
            got_w: pred.width(),
            got_h: pred.height(),
        });
    }
    let mut confusion = vec![0u64; num_classes * num_classes];
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        for label in [p, g] {
            if label as usize >= num_classes {
                return Err(DetectionError::LabelOutOfRange { label, num_classes });
            }
        }
        confusion[g as usize * num_classes + p as usize] += 1;
    }
    let mut total = 0.0;
    let mut present = 0usize;
    for c in 0..num_classes {
        let inter = confusion[c * num_classes + c];
        let gt_c: u64 = confusion[c * num_classes..(c + 1) * num_classes].iter().sum();
        let pred_c: u64 = (0..num_classes).map(|r| confusion[r * num_classes + c]).sum();
        let union = gt_c + pred_c - inter;
        if union > 0 {
            total += inter as f64 / union as f64;
            present += 1;
        }
    }
    if present == 0 {
        return Err(DetectionError::EmptyInput);
    }
    Ok(total / present as f64)
}

#[cfg(test)]
mod tests {
    use super::super::ObjectClass::{self, *};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64, y: f64, w: f64, h: f64, score: f64) -> DetBox {
        DetBox::new(x, y, w, h, score, WithMask)
    }

    fn raster_iou(a: &DetBox, b: &DetBox) -> f64 {
        let inside = |d: &DetBox, x: i64, y: i64| {
            (x as f64) >= d.x && (x as f64) < d.x + d.w && (y as f64) >= d.y && (y as f64) < d.y + d.h
        };
        let (mut inter, mut union) = (0u64, 0u64);
        for y in 0..120 {
            for x in 0..120 {
                let (ia, ib) = (inside(a, x, y), inside(b, x, y));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn random_box(rng: &mut impl Rng, class: ObjectClass) -> DetBox {
        let x = rng.gen_range(0..100) as f64;
        let y = rng.gen_range(0..100) as f64;
        let w = rng.gen_range(1..=20) as f64;
        let h = rng.gen_range(1..=20) as f64;
        DetBox::new(x, y, w, h, rng.gen_range(0..=10) as f64 / 10.0, class)
    }

    #[test]
    fn iou_basics() {
        let a = bx(0.0, 0.0, 10.0, 10.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 5.0, 5.0, 1.0)), 0.0);
        assert_eq!(iou(&a, &bx(10.0, 0.0, 5.0, 5.0, 1.0)), 0.0);
        assert_eq!(iou(&a, &bx(5.0, 0.0, 10.0, 10.0, 1.0)), 50.0 / 150.0);
    }

    #[test]
    fn iou_matches_rasterisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let a = random_box(&mut rng, Person);
            let b = random_box(&mut rng, Person);
            assert_eq!(iou(&a, &b), raster_iou(&a, &b), "{a:?} {b:?}");
        }
    }

    /// Quadratic reference: repeatedly take the best remaining box and drop
    /// its same-class overlaps.
    fn nms_oracle(boxes: &[DetBox], t: f64) -> Vec<DetBox> {
        let mut alive: Vec<usize> = (0..boxes.len()).collect();
        let mut kept = Vec::new();
        while !alive.is_empty() {
            let mut best = 0;
            for k in 1..alive.len() {
                if boxes[alive[k]].score > boxes[alive[best]].score {
                    best = k;
                }
            }
            let i = alive.remove(best);
            kept.push(i);
            alive.retain(|&j| boxes[j].class != boxes[i].class || iou(&boxes[i], &boxes[j]) <= t);
        }
        kept.sort_unstable();
        kept.into_iter().map(|i| boxes[i]).collect()
    }

    #[test]
    fn nms_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0, 0.9);
        assert_eq!(nms(&[a], 0.5).unwrap(), vec![a]);
        let b = bx(0.0, 0.0, 10.0, 10.0, 0.8);
        assert_eq!(nms(&[b, a], 0.5).unwrap(), vec![a]);
        let other = DetBox { class: WithoutMask, ..b };
        assert_eq!(nms(&[a, other], 0.5).unwrap(), vec![a, other]);
        assert!(matches!(nms(&[a], 1.5), Err(DetectionError::BadThreshold(_))));
        assert!(matches!(nms(&[a], -0.1), Err(DetectionError::BadThreshold(_))));
    }

    #[test]
    fn nms_matches_quadratic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(0..25);
            let boxes: Vec<DetBox> = (0..n)
                .map(|_| {
                    let c = ObjectClass::ALL[rng.gen_range(0..3)];
                    random_box(&mut rng, c)
                })
                .collect();
            let t = rng.gen_range(0..=10) as f64 / 10.0;
            let got = nms(&boxes, t).unwrap();
            assert_eq!(got, nms_oracle(&boxes, t));
            assert_eq!(nms(&got, t).unwrap(), got, "fixpoint");
        }
    }

    #[test]
    fn ap_examples() {
        let gts = [bx(0.0, 0.0, 10.0, 10.0, 1.0), bx(20.0, 0.0, 10.0, 10.0, 1.0)];
        let dets = [
            DetBox { score: 0.3, ..gts[0] },
            DetBox { score: 0.7, ..gts[1] },
        ];
        assert_eq!(average_precision(&dets, &gts, 0.5), 1.0);
        assert_eq!(average_precision(&[], &gts, 0.5), 0.0);
        assert_eq!(average_precision(&[], &[], 0.5), 1.0);
        assert_eq!(average_precision(&dets, &[], 0.5), 0.0);
    }

    #[test]
    fn ap_three_gts_trailing_false_positive() {
        // Ranks: TP, TP, TP, FP -> precision 1, 1, 1, 0.75; recall reaches 1
        // at rank 3, so the trailing false positive does not lower AP.
        let gts = [
            bx(0.0, 0.0, 10.0, 10.0, 1.0),
            bx(20.0, 0.0, 10.0, 10.0, 1.0),
            bx(40.0, 0.0, 10.0, 10.0, 1.0),
        ];
        let dets = [
            DetBox { score: 0.9, ..gts[0] },
            DetBox { score: 0.8, ..gts[1] },
            DetBox { score: 0.7, ..gts[2] },
            bx(80.0, 80.0, 5.0, 5.0, 0.1),
        ];
        assert_eq!(average_precision(&dets, &gts, 0.5), 1.0);

        // FP ranked second: precision 1, 1/2, 2/3, 3/4 -> envelope 1, 3/4,
        // 3/4, 3/4 over TPs at ranks 1, 3, 4.
        let dets = [
            DetBox { score: 0.9, ..gts[0] },
            bx(80.0, 80.0, 5.0, 5.0, 0.85),
            DetBox { score: 0.7, ..gts[1] },
            DetBox { score: 0.6, ..gts[2] },
        ];
        let want = (1.0 + 0.75 + 0.75) / 3.0;
        assert!((average_precision(&dets, &gts, 0.5) - want).abs() < 1e-12);
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let g = bx(0.0, 0.0, 10.0, 10.0, 1.0);
        let dets = [DetBox { score: 0.9, ..g }, DetBox { score: 0.8, ..g }];
        // TP then FP; recall 1 reached at rank 1.
        assert_eq!(average_precision(&dets, &[g], 0.5), 1.0);
        let dets = [DetBox { score: 0.9, ..g }, DetBox { score: 0.95, ..g }];
        assert_eq!(average_precision(&dets, &[g], 0.5), 1.0);
    }

    #[test]
    fn mean_ap_examples() {
        let m: BTreeMap<_, _> = [("with-mask", 1.0), ("without-mask", 1.0)].into();
        assert_eq!(mean_ap(&m).unwrap(), 1.0);
        let m: BTreeMap<_, _> = [("a", 0.0), ("b", 1.0)].into();
        assert_eq!(mean_ap(&m).unwrap(), 0.5);
        let m: BTreeMap<_, _> = [("a", 0.3)].into();
        assert_eq!(mean_ap(&m).unwrap(), 0.3);
        assert!(matches!(
            mean_ap(&BTreeMap::<String, f64>::new()),
            Err(DetectionError::EmptyInput)
        ));
    }

    #[test]
    fn evaluate_perfect_and_serialises() {
        let gts = vec![
            DetBox::new(0.0, 0.0, 10.0, 10.0, 1.0, WithMask),
            DetBox::new(30.0, 0.0, 10.0, 10.0, 1.0, WithoutMask),
        ];
        let frames = vec![
            FrameDetections {
                dets: gts.clone(),
                gts: gts.clone(),
            },
            FrameDetections {
                dets: gts[..1].to_vec(),
                gts: gts[..1].to_vec(),
            },
        ];
        let r = evaluate(&frames, 0.5).unwrap();
        assert_eq!(r.map_value, 1.0);
        assert_eq!(r.per_class_ap.len(), 2);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["map"], 1.0);
        assert_eq!(v["per_class_ap"]["with-mask"], 1.0);
        assert!(matches!(evaluate(&[], 0.5), Err(DetectionError::EmptyInput)));
        assert!(evaluate(&frames, 2.0).is_err());
    }

    #[test]
    fn detections_are_matched_within_their_own_frame() {
        let g = DetBox::new(0.0, 0.0, 10.0, 10.0, 1.0, Person);
        let frames = vec![
            FrameDetections {
                dets: vec![],
                gts: vec![g],
            },
            FrameDetections {
                dets: vec![g],
                gts: vec![],
            },
        ];
        assert_eq!(evaluate(&frames, 0.5).unwrap().map_value, 0.0);
    }

    fn seg(w: u32, h: u32, labels: &[u8]) -> SegmentationMap {
        SegmentationMap::new(w, h, labels.to_vec()).unwrap()
    }

    #[test]
    fn miou_examples() {
        let gt = seg(2, 2, &[0, 0, 1, 1]);
        let pred = seg(2, 2, &[0, 1, 1, 1]);
        assert!((miou(&pred, &gt, 2).unwrap() - 7.0 / 12.0).abs() < 1e-12);
        assert_eq!(miou(&gt, &gt, 2).unwrap(), 1.0);
        assert_eq!(miou(&seg(2, 1, &[1, 0]), &seg(2, 1, &[0, 1]), 2).unwrap(), 0.0);
        assert!(matches!(
            miou(&gt, &seg(4, 1, &[0, 0, 1, 1]), 2),
            Err(DetectionError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            miou(&pred, &gt, 1),
            Err(DetectionError::LabelOutOfRange { label: 1, .. })
        ));
    }

    fn labels(len: usize) -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (
            proptest::collection::vec(0u8..4, len),
            proptest::collection::vec(0u8..4, len),
        )
    }

    proptest! {
        #[test]
        fn iou_symmetric(ax in 0i32..50, ay in 0i32..50, aw in 1i32..30, ah in 1i32..30,
                         bx_ in 0i32..50, by in 0i32..50, bw in 1i32..30, bh in 1i32..30) {
            let a = DetBox::new(ax as f64, ay as f64, aw as f64, ah as f64, 0.5, Person);
            let b = DetBox::new(bx_ as f64, by as f64, bw as f64, bh as f64, 0.5, Person);
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            prop_assert_eq!(iou(&a, &a), 1.0);
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn miou_symmetric_and_permutation_invariant((p, g) in labels(36), perm in Just([2u8, 0, 3, 1])) {
            let pred = seg(6, 6, &p);
            let gt = seg(6, 6, &g);
            let m = miou(&pred, &gt, 4).unwrap();
            prop_assert_eq!(m, miou(&gt, &pred, 4).unwrap());
            let pp: Vec<u8> = p.iter().map(|&l| perm[l as usize]).collect();
            let pg: Vec<u8> = g.iter().map(|&l| perm[l as usize]).collect();
            let mp = miou(&seg(6, 6, &pp), &seg(6, 6, &pg), 4).unwrap();
            prop_assert!((m - mp).abs() < 1e-12);
        }

        #[test]
        fn removing_false_positive_never_lowers_ap(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gts: Vec<DetBox> = (0..rng.gen_range(1..6)).map(|_| random_box(&mut rng, Person)).collect();
            let mut dets: Vec<DetBox> = (0..rng.gen_range(1..8)).map(|_| random_box(&mut rng, Person)).collect();
            for g in gts.iter().take(2) {
                dets.push(DetBox { score: rng.gen_range(0..=10) as f64 / 10.0, ..*g });
            }
            let full = average_precision(&dets, &gts, 0.5);
            // A detection overlapping no ground truth can never be a TP.
            let lone = (0..dets.len()).find(|&i| gts.iter().all(|g| iou(&dets[i], g) < 0.5));
            if let Some(i) = lone {
                let mut fewer = dets.clone();
                fewer.remove(i);
                prop_assert!(average_precision(&fewer, &gts, 0.5) >= full - 1e-12);
            }
        }
    }
}
