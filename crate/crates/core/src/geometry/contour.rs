use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Point;
use crate::imgproc::BinaryMask;

/// Outer border of one 8-connected foreground component, traced clockwise
/// (as seen on screen) from its first pixel in raster order.
///
/// Serialises as a JSON array of `[x, y]` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contour {
    pub points: Vec<(u32, u32)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_points(&self) -> Vec<Point> {
        self.points.iter().map(|&p| Point::from(p)).collect()
    }
}

// Clockwise on screen, starting west.
const DIRS: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset between ring neighbours is a unit step")
}

struct Component {
    start: (u32, u32),
    pixels: usize,
    sort_key: (u32, u32),
}

/// Outer contours of every 8-connected component holding at least
/// `min_area` pixels, ordered by leftmost column then topmost row.
/// Holes are not traced.
pub fn find_contours(mask: &BinaryMask, min_area: f64) -> Vec<Contour> {
    let mut components = label_components(mask);
    components.retain(|c| c.pixels as f64 >= min_area);
    components.sort_by_key(|c| c.sort_key);
    components
        .iter()
        .map(|c| trace_outer(mask, c.start, c.pixels))
        .collect()
}

/// 8-connected flood fill; seeds are visited in raster order so each seed is
/// the component's top-most, left-most pixel.
fn label_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for (i, &fg) in mask.bits().iter().enumerate() {
        if !fg || seen[i] {
            continue;
        }
        seen[i] = true;
        queue.push_back(i);
        let mut pixels = 0;
        let mut key = ((i % w) as u32, (i / w) as u32);
        while let Some(j) = queue.pop_front() {
            pixels += 1;
            let (x, y) = ((j % w) as i64, (j / w) as i64);
            key = key.min((x as u32, y as u32));
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let k = ny as usize * w + nx as usize;
                if mask.bits()[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        out.push(Component {
            start: ((i % w) as u32, (i / w) as u32),
            pixels,
            sort_key: key,
        });
    }
    out
}

/// Moore-neighbour tracing. The walk is a deterministic function of
/// (pixel, backtrack cell); it stops when the start pixel is about to repeat
/// its first move, which also handles one-pixel-wide spurs.
fn trace_outer(mask: &BinaryMask, start: (u32, u32), pixels: usize) -> Contour {
    let fg = |x: i64, y: i64| mask.get_or_background(x, y);
    let s = (i64::from(start.0), i64::from(start.1));
    let mut points = vec![start];

    let mut cur = s;
    // Raster order guarantees the west neighbour of the start is background.
    let mut back = 0usize;
    let mut first_move = None;
    // Each boundary pixel is entered at most four times.
    let limit = 4 * pixels + 8;
    for _ in 0..limit {
        let mut next = None;
        for step in 1..=8 {
            let k = (back + step) % 8;
            let cand = (cur.0 + DIRS[k].0, cur.1 + DIRS[k].1);
            if fg(cand.0, cand.1) {
                let prev = (back + step - 1) % 8;
                let prev_cell = (cur.0 + DIRS[prev].0, cur.1 + DIRS[prev].1);
                next = Some((cand, dir_index(prev_cell.0 - cand.0, prev_cell.1 - cand.1)));
                break;
            }
        }
        let Some(step) = next else {
            // isolated pixel
            break;
        };
        match first_move {
            None => first_move = Some(step),
            Some(first) if cur == s && step == first => {
                points.pop();
                break;
            }
            Some(_) => {}
        }
        let (n, n_back) = step;
        points.push((n.0 as u32, n.1 as u32));
        cur = n;
        back = n_back;
    }
    Contour { points }
}
