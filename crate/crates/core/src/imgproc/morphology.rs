//! Binary dilation, erosion and closing.
//!
//! Dilation is the Minkowski sum (`p` is set iff `p - b` is set for some
//! offset `b` of the element) and erosion the Minkowski difference (`p` is
//! set iff `p + b` is set for every `b`). Pixels outside the frame are
//! background for both.

use super::{BinaryMask, ImageError};

/// Odd-sized boolean neighbourhood anchored at its centre pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl StructuringElement {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, ImageError> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(ImageError::InvalidStructuringElement(format!(
                "dimensions {width}x{height} must be odd"
            )));
        }
        if bits.len() != width as usize * height as usize {
            return Err(ImageError::InvalidStructuringElement(format!(
                "{} bits for a {width}x{height} element",
                bits.len()
            )));
        }
        let se = Self {
            width,
            height,
            bits,
        };
        if !se.get(se.anchor().0, se.anchor().1) {
            return Err(ImageError::InvalidStructuringElement(
                "anchor must be a member".into(),
            ));
        }
        Ok(se)
    }

    /// `size x size` square. `size` must be odd.
    pub fn square(size: u32) -> Result<Self, ImageError> {
        Self::new(size, size, vec![true; size as usize * size as usize])
    }

    /// Plus-shaped element of arm length `size / 2`. `size` must be odd.
    pub fn cross(size: u32) -> Result<Self, ImageError> {
        let c = size / 2;
        let bits = (0..size * size)
            .map(|i| i % size == c || i / size == c)
            .collect();
        Self::new(size, size, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn anchor(&self) -> (u32, u32) {
        (self.width / 2, self.height / 2)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    /// Member offsets relative to the anchor.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let (ax, ay) = self.anchor();
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((i64::from(x) - i64::from(ax), i64::from(y) - i64::from(ay)));
                }
            }
        }
        out
    }

    /// Point reflection through the anchor.
    pub fn reflect(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().rev().copied().collect(),
        }
    }
}

/// Binary dilation; out-of-frame neighbours count as background.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::empty(w, h);
    // Scatter each foreground pixel; cheaper than gathering on sparse edge maps.
    for (x, y) in mask.foreground() {
        for &(dx, dy) in &offsets {
            let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
            if nx >= 0 && ny >= 0 && nx < i64::from(w) && ny < i64::from(h) {
                out.set(nx as u32, ny as u32, true);
            }
        }
    }
    out
}

/// Binary erosion; out-of-frame neighbours count as background.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::empty(w, h);
    for (x, y) in mask.foreground() {
        let keep = offsets
            .iter()
            .all(|&(dx, dy)| mask.get_or_background(i64::from(x) + dx, i64::from(y) + dy));
        if keep {
            out.set(x, y, true);
        }
    }
    out
}

/// Morphological closing: `iterations` dilations followed by as many erosions.
pub fn close_gaps(
    mask: &BinaryMask,
    se: &StructuringElement,
    iterations: u32,
) -> Result<BinaryMask, ImageError> {
    if iterations == 0 {
        return Err(ImageError::ZeroIterations);
    }
    let mut out = dilate(mask, se);
    for _ in 1..iterations {
        out = dilate(&out, se);
    }
    for _ in 0..iterations {
        out = erode(&out, se);
    }
    Ok(out)
}
