//! Adaptive text appearance.
//!
//! Real scene-text annotations are turned into records pairing a HoG
//! descriptor of the background around the text with the Lab mean and
//! standard deviation of the text pixels. At synthesis time the descriptor of
//! the chosen embedding spot retrieves the nearest records, and the text color
//! is drawn around the retrieved statistics.

mod database;
mod fonts;
mod groundtruth;
mod hog;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use database::{
    build_database, AppearanceDatabase, DatabaseBuild, SkippedAnnotation, DATABASE_VERSION,
};
pub use fonts::{pick_font, FontEntry, FontList};
pub use groundtruth::{parse_ground_truth, GtAnnotation, GtFormat, GtParseError};
pub use hog::{cell_histograms, extract_hog, resize_bilinear, HogFeature, PatchTooSmall, HOG_LEN};

use crate::geometry::Rect;
use crate::raster::{srgb8_to_lab, Colorspace, LabPixel, Raster, RasterImage};

#[derive(Debug, Error)]
pub enum AppearanceError {
    #[error("box {0:?} has no background ring inside the image")]
    NoBackgroundRing(Rect),
    #[error("text segmentation found only {0} text pixels")]
    SegmentationFailed(usize),
    #[error("box {bbox:?} does not fit in a {width}x{height} image")]
    BoxOutOfBounds {
        bbox: Rect,
        width: usize,
        height: usize,
    },
    #[error("no usable annotations; database would be empty")]
    EmptyDatabase,
    #[error("database version {found:?} does not match engine version {expected:?}")]
    StaleDatabase { found: String, expected: String },
    #[error("font list is empty")]
    EmptyFontList,
    #[error("cannot parse font {0}")]
    InvalidFont(String),
    #[error(transparent)]
    PatchTooSmall(#[from] PatchTooSmall),
    #[error(transparent)]
    GroundTruth(#[from] GtParseError),
    #[error("database line {line}: {source}")]
    Format {
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
}

/// One background-descriptor / text-color pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceRecord {
    pub h_b: HogFeature,
    pub mu_l: f32,
    pub sigma_l: f32,
    pub mu_a: f32,
    pub sigma_a: f32,
    pub mu_b: f32,
    pub sigma_b: f32,
    pub source_id: String,
}

impl AppearanceRecord {
    pub fn mean(&self) -> LabPixel {
        LabPixel::new(self.mu_l, self.mu_a, self.mu_b)
    }
}

/// Width of the background ring around a text box of height `box_h`.
pub fn ring_width(box_h: usize) -> usize {
    ((box_h as f32 * 0.5).round() as usize).max(4)
}

fn check_box(img: &RasterImage, bbox: Rect) -> Result<(), AppearanceError> {
    if bbox.w == 0 || bbox.h == 0 || bbox.right() > img.width() || bbox.bottom() > img.height() {
        return Err(AppearanceError::BoxOutOfBounds {
            bbox,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// The ring patch around `bbox` with the box interior painted in the ring's
/// mean color, plus the ring's mean L. Fails when the ring is empty.
pub fn ring_patch(img: &RasterImage, bbox: Rect) -> Result<(RasterImage, f32), AppearanceError> {
    check_box(img, bbox)?;
    let patch_rect = bbox.expand_clipped(ring_width(bbox.h), img.width(), img.height());
    if patch_rect == bbox {
        return Err(AppearanceError::NoBackgroundRing(bbox));
    }
    let rgb = img.channels() == 3;
    let mut sum = [0u64; 3];
    let mut sum_l = 0.0f64;
    let mut n = 0u64;
    for y in patch_rect.y..patch_rect.bottom() {
        for x in patch_rect.x..patch_rect.right() {
            if bbox.contains(x, y) {
                continue;
            }
            let p = pixel_rgb(img, x, y, rgb);
            for c in 0..3 {
                sum[c] += p[c] as u64;
            }
            sum_l += srgb8_to_lab(p).l as f64;
            n += 1;
        }
    }
    let mean = sum.map(|s| ((s as f64 / n as f64).round()) as u8);
    let mut patch = img.crop(patch_rect.x, patch_rect.y, patch_rect.w, patch_rect.h);
    for y in bbox.y..bbox.bottom() {
        for x in bbox.x..bbox.right() {
            let px = patch.pixel_mut(x - patch_rect.x, y - patch_rect.y);
            if rgb {
                px.copy_from_slice(&mean);
            } else {
                px[0] = mean[0];
            }
        }
    }
    Ok((patch, (sum_l / n as f64) as f32))
}

#[inline]
fn pixel_rgb(img: &RasterImage, x: usize, y: usize, rgb: bool) -> [u8; 3] {
    let p = img.pixel(x, y);
    if rgb {
        [p[0], p[1], p[2]]
    } else {
        [p[0]; 3]
    }
}

/// HoG of the background around `bbox`.
pub fn background_descriptor(img: &RasterImage, bbox: Rect) -> Result<HogFeature, AppearanceError> {
    let (patch, _) = ring_patch(img, bbox)?;
    Ok(extract_hog(&patch)?)
}

/// Bin of an L value on the 256-level histogram used for thresholding.
#[inline]
pub fn lightness_bin(l: f32) -> usize {
    ((l * 2.56).floor().max(0.0) as usize).min(255)
}

/// Otsu threshold over a 256-bin histogram: bins `<= t` form the dark class.
/// `None` when fewer than two bins are populated.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let (mut w0, mut sum0) = (0u64, 0.0f64);
    let (mut best, mut best_t) = (-1.0f64, 0usize);
    for (t, &c) in hist.iter().enumerate().take(255) {
        w0 += c;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    Some(best_t)
}

/// Minimum number of text pixels for a usable record.
pub const MIN_TEXT_PIXELS: usize = 10;

/// Text pixels inside `bbox`: Otsu split on L, keeping the cluster whose mean
/// L is farther from the ring; when the two are within 2 L units of each
/// other, the smaller cluster.
pub fn segment_text(
    img: &RasterImage,
    bbox: Rect,
    ring_l: f32,
) -> Result<Vec<LabPixel>, AppearanceError> {
    let rgb = img.channels() == 3;
    let labs: Vec<LabPixel> = (bbox.y..bbox.bottom())
        .flat_map(|y| (bbox.x..bbox.right()).map(move |x| (x, y)))
        .map(|(x, y)| srgb8_to_lab(pixel_rgb(img, x, y, rgb)))
        .collect();
    let mut hist = [0u64; 256];
    for p in &labs {
        hist[lightness_bin(p.l)] += 1;
    }
    let t = otsu_threshold(&hist).ok_or(AppearanceError::SegmentationFailed(0))?;
    let (dark, light): (Vec<LabPixel>, Vec<LabPixel>) =
        labs.into_iter().partition(|p| lightness_bin(p.l) <= t);
    let mean_l = |v: &[LabPixel]| v.iter().map(|p| p.l as f64).sum::<f64>() / v.len() as f64;
    let d_dark = (mean_l(&dark) - ring_l as f64).abs();
    let d_light = (mean_l(&light) - ring_l as f64).abs();
    let text = if (d_dark - d_light).abs() < 2.0 {
        if dark.len() < light.len() {
            dark
        } else {
            light
        }
    } else if d_dark > d_light {
        dark
    } else {
        light
    };
    if text.len() < MIN_TEXT_PIXELS {
        return Err(AppearanceError::SegmentationFailed(text.len()));
    }
    Ok(text)
}

/// Mean and population standard deviation per Lab channel.
pub fn lab_moments(pixels: &[LabPixel]) -> [(f32, f32); 3] {
    let n = pixels.len() as f64;
    let chan = |f: fn(&LabPixel) -> f32| {
        let mean = pixels.iter().map(|p| f(p) as f64).sum::<f64>() / n;
        let var = pixels
            .iter()
            .map(|p| (f(p) as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean as f32, var.sqrt() as f32)
    };
    [chan(|p| p.l), chan(|p| p.a), chan(|p| p.b)]
}

/// Builds one record from an annotated text box in a real image.
pub fn build_record(
    crop: &RasterImage,
    bbox: Rect,
    source_id: &str,
) -> Result<AppearanceRecord, AppearanceError> {
    let (patch, ring_l) = ring_patch(crop, bbox)?;
    let h_b = extract_hog(&patch)?;
    let text = segment_text(crop, bbox, ring_l)?;
    let [(mu_l, sigma_l), (mu_a, sigma_a), (mu_b, sigma_b)] = lab_moments(&text);
    Ok(AppearanceRecord {
        h_b,
        mu_l: mu_l.clamp(0.0, 100.0),
        sigma_l,
        mu_a,
        sigma_a,
        mu_b,
        sigma_b,
        source_id: source_id.to_string(),
    })
}

/// A retrieved record and its descriptor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<'a> {
    pub record: &'a AppearanceRecord,
    pub distance: f64,
}

fn neighbor_cmp(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.record.source_id.cmp(&b.record.source_id))
}

/// The `k` records nearest to `h_s` (Euclidean), ascending; ties are broken
/// by `source_id`. `k` is clamped to the database size.
pub fn query_nearest<'a>(
    db: &'a AppearanceDatabase,
    h_s: &HogFeature,
    k: usize,
) -> Vec<Neighbor<'a>> {
    let mut all: Vec<Neighbor> = db
        .records
        .iter()
        .map(|r| Neighbor {
            record: r,
            distance: r.h_b.distance(h_s),
        })
        .collect();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, neighbor_cmp);
        all.truncate(k);
    }
    all.sort_by(neighbor_cmp);
    all
}

/// Text color drawn uniformly within one standard deviation of the record's
/// mean, independently per channel; L is clamped to [0, 100].
pub fn sample_text_color<R: Rng + ?Sized>(record: &AppearanceRecord, rng: &mut R) -> LabPixel {
    let mut jitter = |mu: f32, sigma: f32| mu + rng.gen_range(-1.0f32..=1.0) * sigma;
    let l = jitter(record.mu_l, record.sigma_l).clamp(0.0, 100.0);
    let a = jitter(record.mu_a, record.sigma_a);
    let b = jitter(record.mu_b, record.sigma_b);
    LabPixel::new(l, a, b)
}

/// Solid sRGB image, handy for constructing fixtures.
pub fn solid(width: usize, height: usize, rgb: [u8; 3]) -> RasterImage {
    let data = (0..width * height).flat_map(|_| rgb).collect();
    Raster::from_vec(width, height, 3, Colorspace::Srgb8, data).expect("consistent by construction")
}
