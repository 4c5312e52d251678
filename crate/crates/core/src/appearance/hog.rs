//! Fixed-geometry HoG descriptor used to index background appearance.
//!
//! The patch is resized to 32x32 gray, split into 4x4 cells of 8x8 pixels,
//! each cell voting into 9 unsigned orientation bins; 2x2-cell blocks at a
//! one-cell stride (3x3 blocks) are L2-Hys normalized and concatenated.

use serde::{Deserialize, Serialize};

use crate::raster::{to_gray, FloatImage, RasterImage};

pub const PATCH_SIDE: usize = 32;
pub const CELL_SIDE: usize = 8;
pub const CELLS: usize = PATCH_SIDE / CELL_SIDE;
pub const BINS: usize = 9;
pub const BLOCKS: usize = CELLS - 1;
pub const BLOCK_LEN: usize = 4 * BINS;
pub const HOG_LEN: usize = BLOCKS * BLOCKS * BLOCK_LEN;
pub const HYS_CLIP: f32 = 0.2;
pub const NORM_EPS: f32 = 1e-6;

/// Minimum patch area accepted by [`extract_hog`].
pub const MIN_PATCH_AREA: usize = 64;

/// A 324-entry HoG descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HogFeature(pub Vec<f32>);

impl HogFeature {
    pub fn zeros() -> Self {
        HogFeature(vec![0.0; HOG_LEN])
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean distance, accumulated in double precision.
    pub fn distance(&self, other: &HogFeature) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Bilinear resize of a single-channel float image, pixel centers aligned.
pub fn resize_bilinear(img: &FloatImage, out_w: usize, out_h: usize) -> Vec<f32> {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let sx = w as f32 / out_w as f32;
    let sy = h as f32 / out_h as f32;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f32;
        for ox in 0..out_w {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f32;
            let top = src[y0 * w + x0] * (1.0 - tx) + src[y0 * w + x1] * tx;
            let bot = src[y1 * w + x0] * (1.0 - tx) + src[y1 * w + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

/// Per-cell orientation histograms (row-major cells) before block normalization.
pub fn cell_histograms(patch: &RasterImage) -> Vec<[f32; BINS]> {
    let gray = to_gray(patch);
    let img = resize_bilinear(&gray, PATCH_SIDE, PATCH_SIDE);
    let n = PATCH_SIDE;
    let at = |x: isize, y: isize| {
        img[(y.clamp(0, n as isize - 1) as usize) * n + x.clamp(0, n as isize - 1) as usize]
    };
    let bin_width = 180.0 / BINS as f32;
    let mut cells = vec![[0.0f32; BINS]; CELLS * CELLS];
    for y in 0..n {
        for x in 0..n {
            let (xi, yi) = (x as isize, y as isize);
            let gx = at(xi + 1, yi) - at(xi - 1, yi);
            let gy = at(xi, yi + 1) - at(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut deg = gy.atan2(gx).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            if deg >= 180.0 {
                deg -= 180.0;
            }
            // Bin k is centered on k * 20 degrees; split linearly between neighbors.
            let pos = deg / bin_width;
            let lo = pos.floor() as usize % BINS;
            let hi = (lo + 1) % BINS;
            let frac = pos - pos.floor();
            let cell = &mut cells[(y / CELL_SIDE) * CELLS + x / CELL_SIDE];
            cell[lo] += mag * (1.0 - frac);
            cell[hi] += mag * frac;
        }
    }
    cells
}

fn l2_hys(block: &mut [f32]) {
    let norm = |v: &[f32]| (v.iter().map(|x| x * x).sum::<f32>() + NORM_EPS * NORM_EPS).sqrt();
    let n = norm(block);
    block.iter_mut().for_each(|v| *v = (*v / n).min(HYS_CLIP));
    let n = norm(block);
    block.iter_mut().for_each(|v| *v /= n);
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("patch {width}x{height} is below the minimum area of {MIN_PATCH_AREA} pixels")]
pub struct PatchTooSmall {
    pub width: usize,
    pub height: usize,
}

pub fn extract_hog(patch: &RasterImage) -> Result<HogFeature, PatchTooSmall> {
    if patch.width() * patch.height() < MIN_PATCH_AREA || patch.width() == 0 || patch.height() == 0
    {
        return Err(PatchTooSmall {
            width: patch.width(),
            height: patch.height(),
        });
    }
    let cells = cell_histograms(patch);
    let mut out = Vec::with_capacity(HOG_LEN);
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            let mut block = Vec::with_capacity(BLOCK_LEN);
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                block.extend_from_slice(&cells[(by + dy) * CELLS + bx + dx]);
            }
            l2_hys(&mut block);
            out.extend(block);
        }
    }
    Ok(HogFeature(out))
}
