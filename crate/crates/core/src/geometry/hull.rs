use super::{cross, GeometryError, Point};

/// Convex hull by Andrew's monotone chain.
///
/// Vertices come back counter-clockwise in the standard (y-up) sense,
/// starting from the lowest-x, lowest-y vertex, with collinear points dropped.
/// A single distinct point yields one vertex and a collinear set yields its
/// two extremes.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    if !points.iter().all(Point::is_finite) {
        return Err(GeometryError::NonFinite);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(pts);
    }

    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    Ok(hull)
}
