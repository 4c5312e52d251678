//! Where text goes: eligible-pixel masks, grid-scan box search, orientation
//! from local structure, and the final weighted pick.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Quad, Rect, RotatedRect};
use crate::raster::{BinaryMask, FloatIntegral, GradientField, IntegralTable, RasterError};
use crate::saliency::{SaliencyMap, SaliencyMask};
use crate::semantics::connected_regions;

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

impl From<RasterError> for PlacementError {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::DimensionMismatch(a, b, c, d) => {
                PlacementError::DimensionMismatch(a, b, c, d)
            }
            other => unreachable!("mask AND only fails on dimensions: {other}"),
        }
    }
}

/// Semantic mask AND low-saliency mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityMask {
    pub mask: BinaryMask,
    pub semantic_true: usize,
    pub saliency_threshold: f32,
}

impl EligibilityMask {
    /// Marks every pixel whose center lies in `quad` as ineligible.
    pub fn carve(&mut self, quad: &Quad) {
        let (w, h) = (self.mask.width(), self.mask.height());
        let pixels: Vec<_> = quad.pixels(w, h).collect();
        for (x, y) in pixels {
            self.mask.set(x, y, false);
        }
    }
}

pub fn combine_masks(
    sem: &BinaryMask,
    sal: &SaliencyMask,
) -> Result<EligibilityMask, PlacementError> {
    Ok(EligibilityMask {
        mask: sem.and(&sal.mask)?,
        semantic_true: sem.count_true(),
        saliency_threshold: sal.threshold,
    })
}

/// Fraction of the pixels inside `quad` that are set in `mask`; 0 for an
/// empty footprint.
pub fn quad_coverage(mask: &BinaryMask, quad: &Quad) -> f32 {
    let (mut n, mut hit) = (0usize, 0usize);
    for (x, y) in quad.pixels(mask.width(), mask.height()) {
        n += 1;
        hit += mask.get(x, y) as usize;
    }
    if n == 0 {
        0.0
    } else {
        hit as f32 / n as f32
    }
}

/// Mean saliency over the pixels inside `quad`.
pub fn quad_mean_saliency(sal: &SaliencyMap, quad: &Quad) -> f32 {
    let (mut n, mut acc) = (0usize, 0.0f64);
    for (x, y) in quad.pixels(sal.width(), sal.height()) {
        n += 1;
        acc += sal.get(x, y) as f64;
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64) as f32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    /// Baseline angle parallel to the dominant structure, in (-pi/2, pi/2].
    pub theta: f32,
    /// (l1 - l2) / (l1 + l2) of the structure tensor, in [0, 1].
    pub coherence: f32,
}

fn orientation_from_tensor(jxx: f64, jyy: f64, jxy: f64) -> Orientation {
    let trace = jxx + jyy;
    if trace <= 1e-12 {
        return Orientation {
            theta: 0.0,
            coherence: 0.0,
        };
    }
    let diff = ((jxx - jyy).powi(2) + 4.0 * jxy * jxy).sqrt();
    let coherence = (diff / (trace + 1e-12)).clamp(0.0, 1.0);
    // Dominant gradient direction; the structure runs perpendicular to it.
    let normal = 0.5 * (2.0 * jxy).atan2(jxx - jyy);
    let mut theta = normal + std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    while theta > pi / 2.0 {
        theta -= pi;
    }
    while theta <= -pi / 2.0 {
        theta += pi;
    }
    Orientation {
        theta: theta as f32,
        coherence: coherence as f32,
    }
}

/// Structure-tensor orientation averaged over `window` (clipped to the field).
pub fn estimate_orientation(grad: &GradientField, window: Rect) -> Orientation {
    let x1 = window.right().min(grad.width);
    let y1 = window.bottom().min(grad.height);
    let (mut jxx, mut jyy, mut jxy) = (0.0f64, 0.0f64, 0.0f64);
    for y in window.y.min(y1)..y1 {
        for x in window.x.min(x1)..x1 {
            let i = y * grad.width + x;
            let (gx, gy) = (grad.gx[i] as f64, grad.gy[i] as f64);
            jxx += gx * gx;
            jyy += gy * gy;
            jxy += gx * gy;
        }
    }
    orientation_from_tensor(jxx, jyy, jxy)
}

/// Summed-area tables of the tensor components for O(1) window queries.
pub struct TensorIntegrals {
    xx: FloatIntegral,
    yy: FloatIntegral,
    xy: FloatIntegral,
    width: usize,
    height: usize,
}

impl TensorIntegrals {
    pub fn new(grad: &GradientField) -> Self {
        let (w, h) = (grad.width, grad.height);
        let xx: Vec<f32> = grad.gx.iter().map(|g| g * g).collect();
        let yy: Vec<f32> = grad.gy.iter().map(|g| g * g).collect();
        let xy: Vec<f32> = grad.gx.iter().zip(&grad.gy).map(|(a, b)| a * b).collect();
        Self {
            xx: FloatIntegral::new(w, h, &xx),
            yy: FloatIntegral::new(w, h, &yy),
            xy: FloatIntegral::new(w, h, &xy),
            width: w,
            height: h,
        }
    }

    pub fn orientation(&self, window: Rect) -> Orientation {
        let x1 = window.right().min(self.width);
        let y1 = window.bottom().min(self.height);
        let (x0, y0) = (window.x.min(x1), window.y.min(y1));
        orientation_from_tensor(
            self.xx.rect_sum(x0, y0, x1, y1),
            self.yy.rect_sum(x0, y0, x1, y1),
            self.xy.rect_sum(x0, y0, x1, y1),
        )
    }
}

/// A rotated text box proposed for one eligible region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementCandidate {
    pub center: Point,
    pub width: f32,
    pub height: f32,
    /// Baseline angle in (-pi/4, pi/4], positive clockwise on screen.
    pub theta: f32,
    pub region_id: usize,
    /// Mean saliency inside the box; lower is better.
    pub score: f32,
}

impl PlacementCandidate {
    pub fn rect(&self) -> RotatedRect {
        RotatedRect::new(self.center, self.width, self.height, self.theta)
    }

    pub fn quad(&self) -> Quad {
        self.rect().quad()
    }
}

/// Search parameters for [`find_placements`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementShape {
    /// Box width / height.
    pub aspect: f32,
    pub min_height: usize,
    pub max_height: usize,
    /// Cap on box height relative to the region's bounding-box short side.
    pub region_fraction: f32,
    pub coverage_min: f32,
    pub min_region_area: usize,
    /// Geometric step of the height ladder.
    pub ladder_factor: f32,
    /// Orientation is applied only at or above this coherence.
    pub coherence_gate: f32,
    /// Half-width of the uniform angle jitter used below the gate, degrees.
    pub jitter_degrees: f32,
    pub max_iou: f32,
}

impl Default for PlacementShape {
    fn default() -> Self {
        Self {
            aspect: 3.0,
            min_height: 16,
            max_height: 128,
            region_fraction: 0.8,
            coverage_min: 0.98,
            min_region_area: 32 * 32,
            ladder_factor: 1.26,
            coherence_gate: 0.3,
            jitter_degrees: 3.0,
            max_iou: 0.05,
        }
    }
}

impl PlacementShape {
    /// Integer box heights from `min_height` up to `max_h`, growing by `ladder_factor`.
    pub fn height_ladder(&self, max_h: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut h = self.min_height.max(1) as f32;
        while h.round() as usize <= max_h {
            let v = h.round() as usize;
            if out.last() != Some(&v) {
                out.push(v);
            }
            h *= self.ladder_factor.max(1.01);
        }
        out
    }

    pub fn box_width(&self, height: usize) -> usize {
        ((height as f32 * self.aspect).round() as usize).max(1)
    }

    /// Upper bound on box height for a region with this bounding box.
    pub fn region_max_height(&self, bbox: &Rect) -> usize {
        let short = bbox.w.min(bbox.h) as f32;
        self.max_height
            .min((self.region_fraction * short).floor() as usize)
    }

    pub fn clamp_theta(&self, theta: f32) -> f32 {
        let q = std::f32::consts::FRAC_PI_4;
        if theta > q {
            q
        } else if theta <= -q {
            // (-pi/4, pi/4] is half-open; the nearest admissible angle.
            -q + 1e-4
        } else {
            theta
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) keyed by the seed position, so the scan can run in any order.
fn keyed_unit(base: u64, keys: [u64; 4]) -> f32 {
    let mut h = base;
    for k in keys {
        h = splitmix64(h ^ k);
    }
    ((h >> 40) as f32) / (1u64 << 24) as f32
}

struct ScanContext<'a> {
    mask: &'a BinaryMask,
    table: IntegralTable,
    tensors: TensorIntegrals,
    saliency_sums: FloatIntegral,
    shape: &'a PlacementShape,
    jitter_base: u64,
}

impl ScanContext<'_> {
    fn scan(&self, region_id: usize, bbox: Rect, h: usize) -> Vec<PlacementCandidate> {
        let (iw, ih) = (self.mask.width(), self.mask.height());
        let w = self.shape.box_width(h);
        if w > bbox.w || h > bbox.h || w > iw || h > ih {
            return Vec::new();
        }
        let stride = (h / 4).max(1);
        let need = (self.shape.coverage_min * (w * h) as f32).ceil() as u32;
        let mut out = Vec::new();
        let mut y = bbox.y;
        while y + h <= bbox.bottom() {
            let mut x = bbox.x;
            while x + w <= bbox.right() {
                if self.table.rect_sum(x, y, x + w, y + h) >= need {
                    if let Some(c) = self.refine(region_id, x, y, w, h) {
                        out.push(c);
                    }
                }
                x += stride;
            }
            y += stride;
        }
        out
    }

    fn refine(
        &self,
        region_id: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
    ) -> Option<PlacementCandidate> {
        let (iw, ih) = (self.mask.width(), self.mask.height());
        let center = Point::new(x as f32 + w as f32 / 2.0, y as f32 + h as f32 / 2.0);
        let window =
            Rect::centered_clipped(center.x, center.y, 2.0 * w as f32, 2.0 * h as f32, iw, ih);
        let o = self.tensors.orientation(window);
        let theta = if o.coherence >= self.shape.coherence_gate {
            self.shape.clamp_theta(o.theta)
        } else {
            let u = keyed_unit(
                self.jitter_base,
                [region_id as u64, h as u64, x as u64, y as u64],
            );
            (2.0 * u - 1.0) * self.shape.jitter_degrees.to_radians()
        };
        let rect = RotatedRect::new(center, w as f32, h as f32, theta);
        let quad = rect.quad();
        if !quad.in_bounds(iw, ih) {
            return None;
        }
        let (mut n, mut hit, mut sal) = (0usize, 0usize, 0.0f64);
        for (py, x0, x1) in quad.row_spans(iw, ih) {
            n += x1 - x0;
            hit += self.table.rect_sum(x0, py, x1, py + 1) as usize;
            sal += self.saliency_sums.rect_sum(x0, py, x1, py + 1);
        }
        if n == 0 || (hit as f32) < self.shape.coverage_min * n as f32 {
            return None;
        }
        Some(PlacementCandidate {
            center,
            width: w as f32,
            height: h as f32,
            theta,
            region_id,
            score: (sal / n as f64) as f32,
        })
    }
}

/// Total order used to rank candidates: score, then region, then position and size.
fn rank_key(c: &PlacementCandidate) -> (f32, usize, f32, f32, f32) {
    (c.score, c.region_id, c.center.y, c.center.x, c.height)
}

fn rank_cmp(a: &PlacementCandidate, b: &PlacementCandidate) -> std::cmp::Ordering {
    let (ka, kb) = (rank_key(a), rank_key(b));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        .then(ka.3.total_cmp(&kb.3))
        .then(ka.4.total_cmp(&kb.4))
}

/// Grid-scan search over every eligible region.
///
/// Candidates come back sorted by ascending score and pairwise non-overlapping
/// (rotated IoU below `shape.max_iou`), chosen greedily in score order.
pub fn find_placements<R: Rng + ?Sized>(
    elig: &EligibilityMask,
    saliency: &SaliencyMap,
    grad: &GradientField,
    shape: &PlacementShape,
    rng: &mut R,
) -> Vec<PlacementCandidate> {
    let mask = &elig.mask;
    let ctx = ScanContext {
        mask,
        table: IntegralTable::new(mask),
        tensors: TensorIntegrals::new(grad),
        saliency_sums: FloatIntegral::new(saliency.width(), saliency.height(), saliency.values()),
        shape,
        jitter_base: rng.gen(),
    };
    let regions = connected_regions(mask, shape.min_region_area);
    let jobs: Vec<(usize, Rect, usize)> = regions
        .iter()
        .flat_map(|r| {
            shape
                .height_ladder(shape.region_max_height(&r.bbox))
                .into_iter()
                .map(move |h| (r.id, r.bbox, h))
        })
        .collect();
    let mut all: Vec<PlacementCandidate> = jobs
        .par_iter()
        .flat_map_iter(|&(id, bbox, h)| ctx.scan(id, bbox, h))
        .collect();
    all.sort_by(rank_cmp);
    suppress_overlaps(all, shape.max_iou)
}

fn suppress_overlaps(sorted: Vec<PlacementCandidate>, max_iou: f32) -> Vec<PlacementCandidate> {
    let mut accepted: Vec<(PlacementCandidate, Quad, [f32; 4])> = Vec::new();
    for c in sorted {
        let q = c.quad();
        let bb = quad_extent(&q);
        let clash = accepted.iter().any(|(_, aq, abb)| {
            bb[0] < abb[2]
                && abb[0] < bb[2]
                && bb[1] < abb[3]
                && abb[1] < bb[3]
                && q.iou(aq) >= max_iou
        });
        if !clash {
            accepted.push((c, q, bb));
        }
    }
    accepted.into_iter().map(|(c, _, _)| c).collect()
}

fn quad_extent(q: &Quad) -> [f32; 4] {
    let mut e = [f32::MAX, f32::MAX, f32::MIN, f32::MIN];
    for p in q.corners() {
        e[0] = e[0].min(p.x);
        e[1] = e[1].min(p.y);
        e[2] = e[2].max(p.x);
        e[3] = e[3].max(p.y);
    }
    e
}

/// Default softness of the score preference in [`select_placements`].
pub const SELECTION_TEMPERATURE: f32 = 0.2;

/// Draws up to `max_count` candidates without replacement, with weight
/// `exp(-score / tau)`. Returned in draw order.
pub fn select_placements<R: Rng + ?Sized>(
    cands: &[PlacementCandidate],
    max_count: usize,
    tau: f32,
    rng: &mut R,
) -> Vec<PlacementCandidate> {
    let mut pool: Vec<(PlacementCandidate, f64)> = cands
        .iter()
        .map(|c| (*c, (-(c.score as f64) / tau as f64).exp()))
        .collect();
    let mut out = Vec::with_capacity(max_count.min(pool.len()));
    while out.len() < max_count && !pool.is_empty() {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut r = rng.gen::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            if r < *w {
                pick = i;
                break;
            }
            r -= w;
        }
        out.push(pool.remove(pick).0);
    }
    out
}
