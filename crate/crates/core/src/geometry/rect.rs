use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{convex_hull, midpoint, GeometryError, Point};

/// Rectangle at arbitrary orientation.
///
/// Canonical form: `angle` is the box rotation folded into `[0, pi/2)`,
/// measured from +x towards +y (clockwise on screen); `width` is the extent
/// along that direction and `height` the extent perpendicular to it. An
/// axis-aligned box therefore always has `angle == 0` with `width` its
/// horizontal extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

impl RotatedBox {
    /// Builds a box whose `width` runs along direction `angle` (any value)
    /// and brings it into canonical form.
    pub fn canonical(center: Point, width: f64, height: f64, angle: f64) -> Self {
        let quarters = (angle / FRAC_PI_2).floor();
        let mut theta = angle - quarters * FRAC_PI_2;
        let mut odd = quarters.rem_euclid(2.0) == 1.0;
        if theta >= FRAC_PI_2 {
            theta = 0.0;
            odd = !odd;
        }
        let (w, h) = if odd { (height, width) } else { (width, height) };
        Self {
            center,
            width: w,
            height: h,
            angle: theta.max(0.0),
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    fn axes(&self) -> (Point, Point) {
        let (s, c) = self.angle.sin_cos();
        (Point::new(c, s), Point::new(-s, c))
    }

    /// The four vertices, clockwise on screen. For `angle == 0` the order is
    /// top-left, top-right, bottom-right, bottom-left.
    pub fn vertices(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |su: f64, sv: f64| {
            Point::new(
                self.center.x + su * hw * u.x + sv * hh * v.x,
                self.center.y + su * hw * u.y + sv * hh * v.y,
            )
        };
        [at(-1.0, -1.0), at(1.0, -1.0), at(1.0, 1.0), at(-1.0, 1.0)]
    }

    /// Whether `p` lies inside the box, allowing `tol` slack on each side.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let (u, v) = self.axes();
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        let pu = dx * u.x + dy * u.y;
        let pv = dx * v.x + dy * v.y;
        pu.abs() <= self.width / 2.0 + tol && pv.abs() <= self.height / 2.0 + tol
    }
}

/// Box corners in top-left, top-right, bottom-right, bottom-left order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderedCorners {
    pub tl: Point,
    pub tr: Point,
    pub br: Point,
    pub bl: Point,
}

impl OrderedCorners {
    pub fn as_array(&self) -> [Point; 4] {
        [self.tl, self.tr, self.br, self.bl]
    }

    /// Midpoint of the top edge (`tl`-`tr`).
    pub fn top_mid(&self) -> Point {
        midpoint(self.tl, self.tr)
    }

    /// Midpoint of the right edge (`tr`-`br`).
    pub fn right_mid(&self) -> Point {
        midpoint(self.tr, self.br)
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a.x * b.x + a.y * b.y
}

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
pub fn min_area_rect(points: &[Point]) -> Result<RotatedBox, GeometryError> {
    let hull = convex_hull(points)?;
    match hull.len() {
        1 => return Ok(RotatedBox::canonical(hull[0], 0.0, 0.0, 0.0)),
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let angle = (b.y - a.y).atan2(b.x - a.x);
            let len = (b.x - a.x).hypot(b.y - a.y);
            return Ok(RotatedBox::canonical(midpoint(a, b), len, 0.0, angle));
        }
        _ => {}
    }

    let m = hull.len();
    let edge_frame = |i: usize| {
        let (a, b) = (hull[i], hull[(i + 1) % m]);
        let len = (b.x - a.x).hypot(b.y - a.y);
        let u = Point::new((b.x - a.x) / len, (b.y - a.y) / len);
        // inward normal of a counter-clockwise hull
        let v = Point::new(-u.y, u.x);
        (a, u, v)
    };
    let rel = |p: Point, a: Point| Point::new(p.x - a.x, p.y - a.y);

    let (a0, u0, v0) = edge_frame(0);
    let argbest = |f: &dyn Fn(Point) -> f64| {
        (0..m)
            .max_by(|&i, &j| f(hull[i]).total_cmp(&f(hull[j])))
            .expect("non-empty hull")
    };
    let mut right = argbest(&|p| dot(rel(p, a0), u0));
    let mut left = argbest(&|p| -dot(rel(p, a0), u0));
    let mut far = argbest(&|p| dot(rel(p, a0), v0));

    // (area, origin, u, v, min_u, max_u, max_v)
    let mut best: Option<(f64, Point, Point, Point, f64, f64, f64)> = None;
    for i in 0..m {
        let (a, u, v) = edge_frame(i);
        let pu = |k: usize| dot(rel(hull[k % m], a), u);
        let pv = |k: usize| dot(rel(hull[k % m], a), v);
        for _ in 0..m {
            if pu(right + 1) >= pu(right) {
                right = (right + 1) % m;
            } else {
                break;
            }
        }
        for _ in 0..m {
            if pv(far + 1) >= pv(far) {
                far = (far + 1) % m;
            } else {
                break;
            }
        }
        for _ in 0..m {
            if pu(left + 1) <= pu(left) {
                left = (left + 1) % m;
            } else {
                break;
            }
        }
        let (min_u, max_u, max_v) = (pu(left), pu(right), pv(far));
        let area = (max_u - min_u) * max_v;
        if best.map_or(true, |b| area < b.0) {
            best = Some((area, a, u, v, min_u, max_u, max_v));
        }
    }

    let (_, a, u, v, min_u, max_u, max_v) = best.expect("hull has edges");
    let cu = (min_u + max_u) / 2.0;
    let cv = max_v / 2.0;
    let center = Point::new(a.x + cu * u.x + cv * v.x, a.y + cu * u.y + cv * v.y);
    Ok(RotatedBox::canonical(
        center,
        max_u - min_u,
        max_v,
        u.y.atan2(u.x),
    ))
}

/// Orders the box vertices clockwise on screen starting at the top-left,
/// defined as the vertex with minimal `x + y`, ties broken by minimal `y`
/// and then minimal `x`.
pub fn order_corners(rect: &RotatedBox) -> OrderedCorners {
    let verts = rect.vertices();
    let scale = verts
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0, f64::max);
    let eps = 1e-9 * scale;
    let tie = |a: f64, b: f64| (a - b).abs() <= eps;

    let mut tl = 0;
    for i in 1..4 {
        let (p, q) = (verts[i], verts[tl]);
        let (sp, sq) = (p.x + p.y, q.x + q.y);
        let better = if !tie(sp, sq) {
            sp < sq
        } else if !tie(p.y, q.y) {
            p.y < q.y
        } else {
            p.x < q.x
        };
        if better {
            tl = i;
        }
    }
    OrderedCorners {
        tl: verts[tl],
        tr: verts[(tl + 1) % 4],
        br: verts[(tl + 2) % 4],
        bl: verts[(tl + 3) % 4],
    }
}

/// Arithmetic mean of the four corners.
pub fn box_center(corners: &OrderedCorners) -> Point {
    let pts = corners.as_array();
    Point::new(
        pts.iter().map(|p| p.x).sum::<f64>() / 4.0,
        pts.iter().map(|p| p.y).sum::<f64>() / 4.0,
    )
}
