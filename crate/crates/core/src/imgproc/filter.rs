//! Gaussian smoothing and Canny edge detection.

use std::collections::VecDeque;

use super::{BinaryMask, GrayImage, ImageError};

/// Thresholds and smoothing for [`canny`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannyParams {
    pub low: f64,
    pub high: f64,
    pub sigma: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            low: 50.0,
            high: 150.0,
            sigma: 1.4,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), ImageError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ImageError::NonPositiveSigma(self.sigma));
        }
        if !(self.low >= 0.0 && self.low < self.high) {
            return Err(ImageError::ThresholdOrder {
                low: self.low,
                high: self.high,
            });
        }
        Ok(())
    }
}

/// Maps any integer offset into `0..len` by mirroring with the edge sample
/// repeated (`-1 -> 0`, `len -> len - 1`).
#[inline]
pub(crate) fn reflect_index(i: i64, len: usize) -> usize {
    let n = len as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Normalised 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian convolution with reflect padding; no intermediate rounding.
fn blur_f64(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as i64;

    let mut horizontal = vec![0.0; w * h];
    let mut padded = vec![0.0; w + 2 * radius as usize];
    for y in 0..h {
        let row = &img.data()[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = f64::from(row[reflect_index(i as i64 - radius, w)]);
        }
        let out = &mut horizontal[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            *o = padded[x..x + taps.len()]
                .iter()
                .zip(&taps)
                .map(|(p, t)| p * t)
                .sum();
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, t) in taps.iter().enumerate() {
            let sy = reflect_index(y as i64 + k as i64 - radius, h);
            let src = &horizontal[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Gaussian blur with kernel radius `ceil(3 * sigma)` and reflect padding.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage, ImageError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ImageError::NonPositiveSigma(sigma));
    }
    let data = blur_f64(img, sigma)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// 3x3 Sobel derivatives of a float raster, reflect padding.
pub(crate) fn sobel(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let ym = reflect_index(y as i64 - 1, h) * w;
        let y0 = y * w;
        let yp = reflect_index(y as i64 + 1, h) * w;
        for x in 0..w {
            let xm = reflect_index(x as i64 - 1, w);
            let xp = reflect_index(x as i64 + 1, w);
            let (a, b, c) = (data[ym + xm], data[ym + x], data[ym + xp]);
            let (d, f) = (data[y0 + xm], data[y0 + xp]);
            let (g, hh, i) = (data[yp + xm], data[yp + x], data[yp + xp]);
            gx[y0 + x] = (c + 2.0 * f + i) - (a + 2.0 * d + g);
            gy[y0 + x] = (g + 2.0 * hh + i) - (a + 2.0 * b + c);
        }
    }
    (gx, gy)
}

/// Sobel gradient magnitude of the blurred image, as seen by [`canny`].
pub fn gradient_magnitude(img: &GrayImage, sigma: f64) -> Result<Vec<f64>, ImageError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ImageError::NonPositiveSigma(sigma));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (gx, gy) = sobel(&blur_f64(img, sigma), w, h);
    Ok(gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect())
}

const TAN_22_5: f64 = 0.414_213_562_373_095_03;
const TAN_67_5: f64 = 2.414_213_562_373_095;

/// Classic Canny: blur, Sobel, non-maximum suppression along the gradient
/// direction quantised to 0/45/90/135 degrees, then hysteresis from strong
/// pixels through weak ones with 8-connectivity.
pub fn canny(img: &GrayImage, low: f64, high: f64, sigma: f64) -> Result<BinaryMask, ImageError> {
    CannyParams { low, high, sigma }.validate()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (gx, gy) = sobel(&blur_f64(img, sigma), w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();

    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // 0 = background, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 || m < low {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (dx, dy) = if ay <= ax * TAN_22_5 {
                (1, 0)
            } else if ay >= ax * TAN_67_5 {
                (0, 1)
            } else if gx[i] * gy[i] > 0.0 {
                (1, 1)
            } else {
                (1, -1)
            };
            let (xi, yi) = (x as i64, y as i64);
            if m < at(xi + dx, yi + dy) || m < at(xi - dx, yi - dy) {
                continue;
            }
            if m >= high {
                class[i] = 2;
                queue.push_back(i);
            } else {
                class[i] = 1;
            }
        }
    }

    let mut edges = vec![false; w * h];
    for &i in &queue {
        edges[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 && !edges[j] {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    BinaryMask::new(img.width(), img.height(), edges)
}
