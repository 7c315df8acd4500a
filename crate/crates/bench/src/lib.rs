//! Fixed inputs for the criterion benchmarks, one per pipeline stage.

use edgetrace_core::geometry::{find_contours, Point};
use edgetrace_core::imgproc::{canny, close_gaps, CannyParams, StructuringElement};
use edgetrace_core::{BinaryMask, DistancingConfig, GrayImage};

pub const WIDTH: u32 = 640;
pub const HEIGHT: u32 = 480;

/// A synthetic person mask and the intermediate products of each stage.
pub struct Scene {
    pub mask: BinaryMask,
    pub gray: GrayImage,
    pub edges: BinaryMask,
    pub closed: BinaryMask,
    pub largest_contour: Vec<Point>,
}

impl Scene {
    pub fn new(seed: u64, people: usize) -> Self {
        let cfg = DistancingConfig::default();
        let mask = edgetrace_core::bench::synthetic_person_mask(seed, WIDTH, HEIGHT, people);
        let gray = mask.to_gray();
        let edges = canny_default(&gray, &cfg.canny);
        let se = StructuringElement::square(cfg.morphology.se_size).expect("default SE is valid");
        let closed = close_gaps(&edges, &se, cfg.morphology.iterations).expect("iterations > 0");
        let largest_contour = find_contours(&closed, cfg.min_area)
            .into_iter()
            .max_by_key(|c| c.len())
            .map(|c| c.to_points())
            .unwrap_or_default();
        Self {
            mask,
            gray,
            edges,
            closed,
            largest_contour,
        }
    }
}

pub fn canny_default(gray: &GrayImage, p: &CannyParams) -> BinaryMask {
    canny(gray, p.low, p.high, p.sigma).expect("default Canny parameters are valid")
}
