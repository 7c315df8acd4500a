//! Social-distance scoring of a segmented frame.
//!
//! A binary person mask goes through Canny edges, gap closing, outer contour
//! extraction and minimum-area rectangles. Objects are ranked left to right,
//! pairwise distances are converted to metres with a reference-object
//! calibration, and every pair closer than the threshold counts as a
//! violation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    box_center, euclidean, find_contours, min_area_rect, order_corners, OrderedCorners, Point,
    RotatedBox,
};
use crate::imgproc::{canny, close_gaps, BinaryMask, CannyParams, ImageError, StructuringElement};

pub const DEFAULT_THRESHOLD_M: f64 = 2.0;

#[derive(Debug, Error)]
pub enum DistancingError {
    #[error("calibration needs positive finite values, got {px} px for {metres} m")]
    NonPositiveCalibration { px: f64, metres: f64 },
    #[error("distance threshold must be positive and finite, got {0}")]
    NonPositiveThreshold(f64),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Pixels-per-metre scale derived from a reference object of known width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub reference_width_px: f64,
    pub reference_width_m: f64,
    pub pixels_per_metre: f64,
}

impl CalibrationProfile {
    pub fn to_metres(&self, px: f64) -> f64 {
        px / self.pixels_per_metre
    }
}

pub fn calibrate(
    reference_width_px: f64,
    reference_width_m: f64,
) -> Result<CalibrationProfile, DistancingError> {
    let valid = |v: f64| v > 0.0 && v.is_finite();
    let ppm = reference_width_px / reference_width_m;
    if !valid(reference_width_px) || !valid(reference_width_m) || !valid(ppm) {
        return Err(DistancingError::NonPositiveCalibration {
            px: reference_width_px,
            metres: reference_width_m,
        });
    }
    Ok(CalibrationProfile {
        reference_width_px,
        reference_width_m,
        pixels_per_metre: ppm,
    })
}

/// Tunables for the mask-to-objects stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphologyParams {
    /// Side of the square structuring element; must be odd.
    pub se_size: u32,
    pub iterations: u32,
}

impl Default for MorphologyParams {
    fn default() -> Self {
        Self {
            se_size: 3,
            iterations: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistancingConfig {
    pub canny: CannyParams,
    pub morphology: MorphologyParams,
    /// Components smaller than this many pixels are treated as noise.
    pub min_area: f64,
}

impl Default for DistancingConfig {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            morphology: MorphologyParams::default(),
            min_area: 25.0,
        }
    }
}

impl DistancingConfig {
    pub fn validate(&self) -> Result<(), ImageError> {
        self.canny.validate()?;
        StructuringElement::square(self.morphology.se_size)?;
        if self.morphology.iterations == 0 {
            return Err(ImageError::ZeroIterations);
        }
        Ok(())
    }
}

/// One person-shaped region of the frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub rect: RotatedBox,
    pub corners: OrderedCorners,
    pub center: Point,
}

impl DetectedObject {
    pub fn from_rect(rect: RotatedBox) -> Self {
        let corners = order_corners(&rect);
        Self {
            rect,
            center: box_center(&corners),
            corners,
        }
    }
}

/// Canny, closing, contours and rectangles; objects sorted by top-left
/// corner `x` (left-most first), ties by `y`.
pub fn extract_objects(
    person_mask: &BinaryMask,
    config: &DistancingConfig,
) -> Result<Vec<DetectedObject>, DistancingError> {
    config.validate()?;
    if person_mask.is_empty() {
        return Ok(Vec::new());
    }
    let CannyParams { low, high, sigma } = config.canny;
    let edges = canny(&person_mask.to_gray(), low, high, sigma)?;
    let se = StructuringElement::square(config.morphology.se_size)?;
    let closed = close_gaps(&edges, &se, config.morphology.iterations)?;

    let mut objects = Vec::new();
    for contour in find_contours(&closed, config.min_area) {
        let rect = min_area_rect(&contour.to_points()).expect("contours are never empty");
        objects.push(DetectedObject::from_rect(rect));
    }
    objects.sort_by(|a, b| {
        a.corners
            .tl
            .x
            .total_cmp(&b.corners.tl.x)
            .then(a.corners.tl.y.total_cmp(&b.corners.tl.y))
    });
    Ok(objects)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Consecutive left-to-right neighbours, measured between top-edge midpoints.
    Chain,
    /// Every unordered pair, measured between box centres.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub id_a: usize,
    pub id_b: usize,
    pub px_distance: f64,
    pub metric_distance: f64,
    pub kind: DistanceKind,
}

impl DistancePair {
    fn new(id_a: usize, id_b: usize, px: f64, profile: &CalibrationProfile, kind: DistanceKind) -> Self {
        Self {
            id_a,
            id_b,
            px_distance: px,
            metric_distance: profile.to_metres(px),
            kind,
        }
    }
}

/// Left-to-right chain: each object against its right-hand neighbour.
pub fn chain_distances(objects: &[DetectedObject], profile: &CalibrationProfile) -> Vec<DistancePair> {
    objects
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let px = euclidean(w[0].corners.top_mid(), w[1].corners.top_mid());
            DistancePair::new(i, i + 1, px, profile, DistanceKind::Chain)
        })
        .collect()
}

/// Centre-to-centre distance for every unordered pair `(i, j)`, `i < j`.
pub fn all_pairs_distances(
    objects: &[DetectedObject],
    profile: &CalibrationProfile,
) -> Vec<DistancePair> {
    let mut out = Vec::with_capacity(objects.len() * objects.len().saturating_sub(1) / 2);
    for (i, a) in objects.iter().enumerate() {
        for (j, b) in objects.iter().enumerate().skip(i + 1) {
            let px = euclidean(a.center, b.center);
            out.push(DistancePair::new(i, j, px, profile, DistanceKind::AllPairs));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairLabel {
    #[serde(rename = "following-distance")]
    FollowingDistance,
    #[serde(rename = "not-following-distance")]
    NotFollowingDistance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPair {
    #[serde(flatten)]
    pub pair: DistancePair,
    pub label: PairLabel,
}

/// Per-frame compliance summary.
///
/// `pairs` is the basis for `violations` and `score`; `chain` carries the
/// left-to-right neighbour distances for reference only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub frame_id: String,
    pub object_count: usize,
    pub threshold_m: f64,
    pub pairs: Vec<ClassifiedPair>,
    pub chain: Vec<DistancePair>,
    pub violations: usize,
    pub score: f64,
}

/// Labels each pair and scores the frame as `1 - violations / pairs`
/// (1.0 when there are no pairs).
pub fn classify_compliance(
    frame_id: &str,
    object_count: usize,
    pairs: &[DistancePair],
    threshold_m: f64,
) -> Result<ComplianceReport, DistancingError> {
    if !(threshold_m.is_finite() && threshold_m > 0.0) {
        return Err(DistancingError::NonPositiveThreshold(threshold_m));
    }
    let pairs: Vec<ClassifiedPair> = pairs
        .iter()
        .map(|&pair| ClassifiedPair {
            pair,
            label: if pair.metric_distance < threshold_m {
                PairLabel::NotFollowingDistance
            } else {
                PairLabel::FollowingDistance
            },
        })
        .collect();
    let violations = pairs
        .iter()
        .filter(|p| p.label == PairLabel::NotFollowingDistance)
        .count();
    let score = if pairs.is_empty() {
        1.0
    } else {
        1.0 - violations as f64 / pairs.len() as f64
    };
    Ok(ComplianceReport {
        frame_id: frame_id.to_owned(),
        object_count,
        threshold_m,
        pairs,
        chain: Vec::new(),
        violations,
        score,
    })
}

/// The full mask-to-report computation for one frame.
pub fn table2_pipeline(
    person_mask: &BinaryMask,
    profile: &CalibrationProfile,
    threshold_m: f64,
    config: &DistancingConfig,
    frame_id: &str,
) -> Result<ComplianceReport, DistancingError> {
    if !(threshold_m.is_finite() && threshold_m > 0.0) {
        return Err(DistancingError::NonPositiveThreshold(threshold_m));
    }
    let objects = extract_objects(person_mask, config)?;
    report_for_objects(&objects, profile, threshold_m, frame_id)
}

/// Scoring half of [`table2_pipeline`], for callers that already hold objects.
pub fn report_for_objects(
    objects: &[DetectedObject],
    profile: &CalibrationProfile,
    threshold_m: f64,
    frame_id: &str,
) -> Result<ComplianceReport, DistancingError> {
    let pairs = all_pairs_distances(objects, profile);
    let mut report = classify_compliance(frame_id, objects.len(), &pairs, threshold_m)?;
    report.chain = chain_distances(objects, profile);
    Ok(report)
}
