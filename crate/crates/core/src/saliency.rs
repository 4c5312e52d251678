//! Global color-contrast saliency and the low-saliency eligibility mask.
//!
//! [`HistogramContrast`] scores every color by its frequency-weighted Lab
//! distance to all other colors in the image, so rare, distant colors are
//! salient and large homogeneous areas are not. Other models can be plugged
//! in through [`SaliencyModel`].

use thiserror::Error;

use crate::raster::{self, BinaryMask, Colorspace, Raster, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("saliency value {0} outside [0, 1]")]
    OutOfRange(f32),
}

pub type Result<T, E = SaliencyError> = std::result::Result<T, E>;

/// Saliency values in `[0, 1]` with their cached mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    mean: f32,
}

impl SaliencyMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 1,
                actual: values.len(),
            }
            .into());
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SaliencyError::OutOfRange(*v));
        }
        let mean = if values.is_empty() {
            0.0
        } else {
            (values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64) as f32
        };
        Ok(Self {
            width,
            height,
            values,
            mean,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mean(&self) -> f32 {
        self.mean
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// 8-bit grayscale rendering for debugging.
    pub fn to_image(&self) -> RasterImage {
        let data = self
            .values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        Raster::from_vec(self.width, self.height, 1, Colorspace::Gray, data)
            .expect("sized by map invariant")
    }
}

/// Pixels at or below the mean saliency.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMask {
    pub mask: BinaryMask,
    pub threshold: f32,
}

pub fn low_saliency_mask(s: &SaliencyMap) -> SaliencyMask {
    let threshold = s.mean;
    let bits = s.values.iter().map(|&v| v <= threshold).collect();
    SaliencyMask {
        mask: BinaryMask::from_vec(s.width, s.height, bits).expect("sized by map invariant"),
        threshold,
    }
}

pub trait SaliencyModel: Send + Sync {
    fn compute(&self, img: &RasterImage) -> Result<SaliencyMap>;
}

/// Histogram-based global contrast saliency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramContrast {
    /// Quantization levels per RGB channel.
    pub levels: usize,
    /// Fraction of pixels the retained colors must cover.
    pub coverage: f64,
    /// Gaussian smoothing sigma as a fraction of the image diagonal.
    pub sigma_fraction: f32,
}

impl Default for HistogramContrast {
    fn default() -> Self {
        Self {
            levels: 12,
            coverage: 0.95,
            sigma_fraction: 0.02,
        }
    }
}

/// The reduced color palette used by [`HistogramContrast`].
#[derive(Debug, Clone)]
pub struct ColorCodebook {
    /// Mean Lab color of each retained bin.
    pub colors: Vec<[f64; 3]>,
    /// Fraction of pixels assigned to each retained color (sums to 1).
    pub frequencies: Vec<f64>,
    /// Quantization bin -> retained color index (`usize::MAX` for empty bins).
    pub bin_to_color: Vec<usize>,
}

impl HistogramContrast {
    #[inline]
    fn bin_of(&self, p: &[u8]) -> usize {
        let q = |v: u8| v as usize * self.levels / 256;
        (q(p[0]) * self.levels + q(p[1])) * self.levels + q(p[2])
    }

    pub fn codebook(&self, img: &RasterImage) -> Result<ColorCodebook> {
        if img.channels() != 3 {
            return Err(RasterError::InvalidChannelCount {
                expected: 3,
                actual: img.channels(),
            }
            .into());
        }
        let nbins = self.levels.pow(3);
        let mut counts = vec![0usize; nbins];
        let mut sums = vec![[0.0f64; 3]; nbins];
        for p in img.data().chunks_exact(3) {
            let b = self.bin_of(p);
            counts[b] += 1;
            let lab = raster::linear_rgb_to_lab([
                raster::srgb8_to_linear(p[0]),
                raster::srgb8_to_linear(p[1]),
                raster::srgb8_to_linear(p[2]),
            ]);
            for c in 0..3 {
                sums[b][c] += lab[c];
            }
        }
        let total: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..nbins).filter(|&b| counts[b] > 0).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));

        let mut kept = Vec::new();
        let mut covered = 0usize;
        for &b in &order {
            if !kept.is_empty() && covered as f64 >= self.coverage * total as f64 {
                break;
            }
            kept.push(b);
            covered += counts[b];
        }
        let mean = |b: usize| {
            let n = counts[b] as f64;
            [sums[b][0] / n, sums[b][1] / n, sums[b][2] / n]
        };
        let colors: Vec<[f64; 3]> = kept.iter().map(|&b| mean(b)).collect();
        let mut kept_counts: Vec<usize> = kept.iter().map(|&b| counts[b]).collect();
        let mut bin_to_color = vec![usize::MAX; nbins];
        for (i, &b) in kept.iter().enumerate() {
            bin_to_color[b] = i;
        }
        for &b in order.iter().skip(kept.len()) {
            let c = mean(b);
            let nearest = colors
                .iter()
                .enumerate()
                .map(|(i, k)| (i, lab_dist(&c, k)))
                .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                .map(|(i, _)| i)
                .expect("at least one color kept");
            bin_to_color[b] = nearest;
            kept_counts[nearest] += counts[b];
        }
        let frequencies = kept_counts
            .iter()
            .map(|&n| n as f64 / total.max(1) as f64)
            .collect();
        Ok(ColorCodebook {
            colors,
            frequencies,
            bin_to_color,
        })
    }

    /// Per-pixel contrast before smoothing and normalization.
    pub fn raw_contrast(&self, img: &RasterImage) -> Result<Vec<f64>> {
        let book = self.codebook(img)?;
        let per_color: Vec<f64> = book
            .colors
            .iter()
            .map(|c| {
                book.colors
                    .iter()
                    .zip(&book.frequencies)
                    .map(|(o, f)| f * lab_dist(c, o))
                    .sum()
            })
            .collect();
        Ok(img
            .data()
            .chunks_exact(3)
            .map(|p| per_color[book.bin_to_color[self.bin_of(p)]])
            .collect())
    }
}

impl SaliencyModel for HistogramContrast {
    fn compute(&self, img: &RasterImage) -> Result<SaliencyMap> {
        let raw = self.raw_contrast(img)?;
        let (w, h) = (img.width(), img.height());
        let values: Vec<f32> = raw.iter().map(|&v| v as f32).collect();
        let diag = ((w * w + h * h) as f32).sqrt();
        let mut smoothed = gaussian_blur(&values, w, h, self.sigma_fraction * diag);
        let (lo, hi) = smoothed
            .iter()
            .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if smoothed.is_empty() || hi - lo <= 1e-6 * hi.abs().max(1.0) {
            smoothed.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let span = hi - lo;
            smoothed
                .iter_mut()
                .for_each(|v| *v = ((*v - lo) / span).clamp(0.0, 1.0));
        }
        SaliencyMap::from_values(w, h, smoothed)
    }
}

pub fn compute_saliency(img: &RasterImage) -> Result<SaliencyMap> {
    HistogramContrast::default().compute(img)
}

fn lab_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (d0, d1, d2) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f32> = (0..=2 * radius)
        .map(|i| {
            let d = i as f32 - radius as f32;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(values: &[f32], w: usize, h: usize, sigma: f32) -> Vec<f32> {
    if sigma < 0.5 || w == 0 || h == 0 {
        return values.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (i, kv) in k.iter().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    let mut col_acc = vec![0.0f32; w];
    for y in 0..h {
        col_acc.iter_mut().for_each(|v| *v = 0.0);
        for (i, kv) in k.iter().enumerate() {
            let sy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            let src = &tmp[sy * w..(sy + 1) * w];
            for (a, s) in col_acc.iter_mut().zip(src) {
                *a += kv * s;
            }
        }
        out[y * w..(y + 1) * w].copy_from_slice(&col_acc);
    }
    out
}
