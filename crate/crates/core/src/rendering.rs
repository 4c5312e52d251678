//! Glyph rasterization, compositing onto the background, and the per-instance
//! quadrilateral ground truth.

use ab_glyph::{point, Font, PxScale, ScaleFont};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::FontEntry;
use crate::geometry::{Point, Quad, Rect, RotatedRect};
use crate::placement::PlacementCandidate;
use crate::raster::{
    lab_to_linear_clamped, linear_to_srgb8, srgb8_to_linear, Colorspace, FloatImage, LabPixel,
    Raster, RasterImage,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("text is empty")]
    EmptyText,
    #[error("font has no glyph for {0:?}")]
    MissingGlyph(char),
    #[error("pixel height {0} is below the minimum of {MIN_PX_HEIGHT}")]
    HeightTooSmall(u32),
}

pub const MIN_PX_HEIGHT: u32 = 8;

/// Fraction of the placement box left free on each side when fitting ink.
pub const FIT_PADDING: f32 = 0.05;

const CANVAS_PAD: usize = 2;

/// Rasterized text: an alpha mask and the tight box around its ink.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLayout {
    pub text: String,
    pub px_height: u32,
    /// Gray alpha in [0, 1].
    pub alpha: FloatImage,
    /// Tight bounds of `alpha > 0`; zero-sized when there is no ink.
    pub ink: Rect,
}

impl TextLayout {
    /// Wraps an existing alpha mask; the ink box is derived from it.
    pub fn from_alpha(text: impl Into<String>, px_height: u32, alpha: FloatImage) -> Self {
        let ink = ink_bounds(&alpha);
        Self {
            text: text.into(),
            px_height,
            alpha,
            ink,
        }
    }

    #[inline]
    fn alpha_at(&self, x: isize, y: isize) -> f32 {
        if x < 0 || y < 0 || x >= self.alpha.width() as isize || y >= self.alpha.height() as isize {
            0.0
        } else {
            self.alpha.data()[y as usize * self.alpha.width() + x as usize]
        }
    }

    /// Bilinear alpha at continuous layout coordinates (pixel centers at +0.5).
    fn sample(&self, x: f32, y: f32) -> f32 {
        let (fx, fy) = (x - 0.5, y - 0.5);
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = self.alpha_at(xi, yi) * (1.0 - tx) + self.alpha_at(xi + 1, yi) * tx;
        let bot = self.alpha_at(xi, yi + 1) * (1.0 - tx) + self.alpha_at(xi + 1, yi + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

fn ink_bounds(alpha: &FloatImage) -> Rect {
    let (w, h) = (alpha.width(), alpha.height());
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if alpha.data()[y * w + x] > 0.0 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    if x0 == usize::MAX {
        Rect::new(0, 0, 0, 0)
    } else {
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// Lays `text` out left to right on plain advance widths (no kerning) with
/// the font scaled so its ascent-to-descent span is `px_height` pixels.
pub fn rasterize_text(
    text: &str,
    font: &FontEntry,
    px_height: u32,
) -> Result<TextLayout, RenderError> {
    if text.trim().is_empty() {
        return Err(RenderError::EmptyText);
    }
    if px_height < MIN_PX_HEIGHT {
        return Err(RenderError::HeightTooSmall(px_height));
    }
    let font = font.font();
    let scale = PxScale::from(px_height as f32);
    let scaled = font.as_scaled(scale);
    let mut glyphs = Vec::new();
    let mut pen = 0.0f32;
    for c in text.chars() {
        let id = font.glyph_id(c);
        if id.0 == 0 && !c.is_whitespace() {
            return Err(RenderError::MissingGlyph(c));
        }
        glyphs.push(id.with_scale_and_position(
            scale,
            point(pen + CANVAS_PAD as f32, scaled.ascent() + CANVAS_PAD as f32),
        ));
        pen += scaled.h_advance(id);
    }
    let width = pen.ceil() as usize + 2 * CANVAS_PAD;
    let height = (scaled.ascent() - scaled.descent()).ceil() as usize + 2 * CANVAS_PAD;
    let mut alpha = vec![0.0f32; width * height];
    for g in glyphs {
        let Some(outlined) = font.outline_glyph(g) else {
            continue;
        };
        let bb = outlined.px_bounds();
        outlined.draw(|gx, gy, cov| {
            let x = bb.min.x as i64 + gx as i64;
            let y = bb.min.y as i64 + gy as i64;
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                let a = &mut alpha[y as usize * width + x as usize];
                *a = (*a + cov).min(1.0);
            }
        });
    }
    let alpha = Raster::from_vec(width, height, 1, Colorspace::Gray, alpha).expect("sized above");
    let layout = TextLayout::from_alpha(text, px_height, alpha);
    if layout.ink.area() == 0 {
        return Err(RenderError::EmptyText);
    }
    Ok(layout)
}

/// Scale that fits the ink box inside the placement box minus padding.
pub fn fit_scale(ink: &Rect, width: f32, height: f32) -> f32 {
    if ink.area() == 0 {
        return 1.0;
    }
    let avail_w = width * (1.0 - 2.0 * FIT_PADDING);
    let avail_h = height * (1.0 - 2.0 * FIT_PADDING);
    (avail_w / ink.w as f32).min(avail_h / ink.h as f32)
}

/// Rasterizes at the box height, then once more at the size that makes the
/// ink fit the padded box without resampling by more than 5%.
pub fn rasterize_to_fit(
    text: &str,
    font: &FontEntry,
    width: f32,
    height: f32,
) -> Result<TextLayout, RenderError> {
    let px = (height.round() as u32).max(MIN_PX_HEIGHT);
    let layout = rasterize_text(text, font, px)?;
    let s = fit_scale(&layout.ink, width, height);
    if (s - 1.0).abs() <= 0.05 {
        return Ok(layout);
    }
    let refit = (px as f32 * s).floor() as u32;
    if refit == px {
        return Ok(layout);
    }
    rasterize_text(text, font, refit)
}

/// The rotated rectangle the scaled ink occupies inside `placement`.
pub fn ink_rect(layout: &TextLayout, placement: &PlacementCandidate) -> (RotatedRect, f32) {
    let s = fit_scale(&layout.ink, placement.width, placement.height);
    (
        RotatedRect::new(
            placement.center,
            layout.ink.w as f32 * s,
            layout.ink.h as f32 * s,
            placement.theta,
        ),
        s,
    )
}

/// Annotation quad for `layout` placed at `placement`, rounded to whole pixels.
pub fn placed_quad(layout: &TextLayout, placement: &PlacementCandidate) -> Quad {
    ink_rect(layout, placement).0.quad().rounded()
}

/// Alpha-blends the colored, scaled and rotated text onto a copy of the
/// background. Blending happens in linear RGB. Returns the image and the
/// rounded quad around the placed ink.
pub fn composite(
    background: &RasterImage,
    layout: &TextLayout,
    color: LabPixel,
    placement: &PlacementCandidate,
) -> (RasterImage, Quad) {
    let mut out = background.clone();
    let quad = composite_in_place(&mut out, layout, color, placement);
    (out, quad)
}

pub fn composite_in_place(
    img: &mut RasterImage,
    layout: &TextLayout,
    color: LabPixel,
    placement: &PlacementCandidate,
) -> Quad {
    let (rect, s) = ink_rect(layout, placement);
    let quad = rect.quad().rounded();
    if layout.ink.area() == 0 {
        return quad;
    }
    let (w, h) = (img.width(), img.height());
    let rgb = img.channels() == 3;
    let text_lin = lab_to_linear_clamped(color);
    let (sin, cos) = placement.theta.sin_cos();
    let (hw, hh) = (rect.width / 2.0, rect.height / 2.0);
    const MARGIN: f32 = 1.0;
    let area = RotatedRect::new(
        rect.center,
        rect.width + 2.0 * MARGIN,
        rect.height + 2.0 * MARGIN,
        rect.theta,
    )
    .quad()
    .bounding_rect(w, h);
    for y in area.y..area.bottom() {
        for x in area.x..area.right() {
            let dx = x as f32 + 0.5 - rect.center.x;
            let dy = y as f32 + 0.5 - rect.center.y;
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            if u.abs() > hw + MARGIN || v.abs() > hh + MARGIN {
                continue;
            }
            let lx = layout.ink.x as f32 + (u + hw) / s;
            let ly = layout.ink.y as f32 + (v + hh) / s;
            let a = layout.sample(lx, ly).clamp(0.0, 1.0) as f64;
            if a <= 0.0 {
                continue;
            }
            let px = img.pixel_mut(x, y);
            if rgb {
                for c in 0..3 {
                    let bg = srgb8_to_linear(px[c]);
                    px[c] = linear_to_srgb8(a * text_lin[c] + (1.0 - a) * bg);
                }
            } else {
                let t = 0.2126 * text_lin[0] + 0.7152 * text_lin[1] + 0.0722 * text_lin[2];
                let bg = srgb8_to_linear(px[0]);
                px[0] = linear_to_srgb8(a * t + (1.0 - a) * bg);
            }
        }
    }
    quad
}

/// One embedded piece of text and everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextInstance {
    pub text: String,
    pub font: String,
    pub px_height: u32,
    pub color: LabPixel,
    pub placement: PlacementCandidate,
    pub quad: Quad,
    pub record_source_id: String,
}

/// A composited image with its text instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedSample {
    pub image: RasterImage,
    pub instances: Vec<TextInstance>,
    pub seed: u64,
    pub background_id: String,
}

fn coord(v: f32) -> i64 {
    v.round() as i64
}

/// One `x1,y1,x2,y2,x3,y3,x4,y4,transcript` line per instance, LF-terminated.
pub fn emit_annotations(instances: &[TextInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        for p in inst.quad.corners() {
            out.push_str(&format!("{},{},", coord(p.x), coord(p.y)));
        }
        out.push_str(&inst.text);
        out.push('\n');
    }
    out
}

/// Center of a quad (mean of its corners).
pub fn quad_center(q: &Quad) -> Point {
    let c = q.corners();
    Point::new(
        (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0,
        (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0,
    )
}
