//! Contours, convex hulls, minimum-area rotated rectangles and the point
//! arithmetic used by the distance calculation.
//!
//! All coordinates follow the image convention: origin at the top-left,
//! `x` to the right, `y` downward.

mod contour;
mod hull;
mod rect;

pub use contour::{find_contours, Contour};
pub use hull::convex_hull;
pub use rect::{box_center, min_area_rect, order_corners, OrderedCorners, RotatedBox};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("at least one point is required")]
    EmptyInput,
    #[error("point coordinates must be finite")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(u32, u32)> for Point {
    fn from((x, y): (u32, u32)) -> Self {
        Self::new(f64::from(x), f64::from(y))
    }
}

pub fn midpoint(p: Point, q: Point) -> Point {
    Point::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)
}

pub fn euclidean(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// z-component of `(a - o) x (b - o)`.
#[inline]
pub(crate) fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}
