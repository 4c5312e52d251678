use std::path::Path;

use super::{ManifestEntry, RunManifest, SynthError};
use crate::appearance::{FontEntry, FontList};
use crate::raster::{load_rgb, RasterImage};
use crate::rendering::{rasterize_text, TextInstance};

pub const OVERLAY_COLOR: [u8; 3] = [0, 255, 0];
pub const LABEL_PX: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub from: (i64, i64),
    pub to: (i64, i64),
}

/// Integer points on the line from `a` to `b`, both ends included.
pub fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - x).abs();
    let dy = -(b.1 - y).abs();
    let sx = if x < b.0 { 1 } else { -1 };
    let sy = if y < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn put(img: &mut RasterImage, x: i64, y: i64, rgb: [u8; 3], alpha: f32) {
    if x < 0 || y < 0 || x as usize >= img.width() || y as usize >= img.height() {
        return;
    }
    let px = img.pixel_mut(x as usize, y as usize);
    for (c, v) in px.iter_mut().zip(rgb) {
        *c = (alpha * v as f32 + (1.0 - alpha) * *c as f32).round() as u8;
    }
}

/// Draws each instance's quad, and its transcript when a label font is given.
/// Returns the overlay and the quad edges that were drawn.
pub fn draw_overlay(
    image: &RasterImage,
    instances: &[TextInstance],
    label_font: Option<&FontEntry>,
) -> (RasterImage, Vec<Segment>) {
    let mut out = image.clone();
    let mut segments = Vec::new();
    for inst in instances {
        let c = inst.quad.corners();
        let pts: Vec<(i64, i64)> = c
            .iter()
            .map(|p| (p.x.round() as i64, p.y.round() as i64))
            .collect();
        for i in 0..4 {
            let seg = Segment {
                from: pts[i],
                to: pts[(i + 1) % 4],
            };
            for (x, y) in bresenham(seg.from, seg.to) {
                put(&mut out, x, y, OVERLAY_COLOR, 1.0);
            }
            segments.push(seg);
        }
        let Some(font) = label_font else { continue };
        let Ok(label) = rasterize_text(&inst.text, font, LABEL_PX) else {
            continue;
        };
        let (ox, oy) = (
            pts[0].0 - label.ink.x as i64,
            pts[0].1 - 2 - label.ink.bottom() as i64,
        );
        for y in label.ink.y..label.ink.bottom() {
            for x in label.ink.x..label.ink.right() {
                let a = label.alpha.data()[y * label.alpha.width() + x];
                if a > 0.0 {
                    put(&mut out, ox + x as i64, oy + y as i64, OVERLAY_COLOR, a);
                }
            }
        }
    }
    (out, segments)
}

/// Overlay for one sample of a finished run, read back from the run's output.
pub fn preview(manifest_path: &Path, sample: &str) -> Result<RasterImage, SynthError> {
    let manifest = RunManifest::load(manifest_path)?;
    let entry: &ManifestEntry = manifest.entry(sample).ok_or_else(|| {
        SynthError::Manifest(format!(
            "no sample {sample:?} in {}",
            manifest_path.display()
        ))
    })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let image = load_rgb(&dir.join(&entry.image))?;
    let fonts = FontList::load_dir(&manifest.config.fonts).ok();
    let label = fonts.as_ref().and_then(|f| f.entries.first());
    Ok(draw_overlay(&image, &entry.instances, label).0)
}
