//! Per-pixel semantic labels and the allow/deny policy that turns them into
//! a text-embeddable mask.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
pub use crate::raster::BinaryMask;
use crate::raster::{self, RasterError};

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("class id {0} has no palette entry")]
    UnknownClassId(u16),
    #[error("semantic map is {map_w}x{map_h} but the image is {img_w}x{img_h}")]
    DimensionMismatch {
        map_w: usize,
        map_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("palette line {line}: {reason}")]
    Palette { line: usize, reason: String },
    #[error("class {0:?} is both allowed and denied")]
    PolicyOverlap(String),
    #[error("policy: {0}")]
    Policy(#[from] serde_json::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T, E = SemanticsError> = std::result::Result<T, E>;

/// Class-id label grid with its id -> name palette.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    palette: BTreeMap<u16, String>,
}

impl SemanticMap {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u16>,
        palette: BTreeMap<u16, String>,
    ) -> Result<Self> {
        if labels.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 1,
                actual: labels.len(),
            }
            .into());
        }
        let mut seen = BTreeSet::new();
        for &id in &labels {
            if seen.insert(id) && !palette.contains_key(&id) {
                return Err(SemanticsError::UnknownClassId(id));
            }
        }
        Ok(Self {
            width,
            height,
            labels,
            palette,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn palette(&self) -> &BTreeMap<u16, String> {
        &self.palette
    }

    pub fn class_name(&self, x: usize, y: usize) -> &str {
        &self.palette[&self.labels[y * self.width + x]]
    }

    /// Pixel count per class name.
    pub fn class_histogram(&self) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
        for &id in &self.labels {
            *counts.entry(id).or_default() += 1;
        }
        let mut out = BTreeMap::new();
        for (id, n) in counts {
            *out.entry(self.palette[&id].as_str()).or_default() += n;
        }
        out
    }

    pub fn check_pairing(&self, image_width: usize, image_height: usize) -> Result<()> {
        if self.width != image_width || self.height != image_height {
            return Err(SemanticsError::DimensionMismatch {
                map_w: self.width,
                map_h: self.height,
                img_w: image_width,
                img_h: image_height,
            });
        }
        Ok(())
    }
}

/// Parses `id<TAB>name` lines; blank lines and `#` comments are skipped.
pub fn parse_palette(text: &str) -> Result<BTreeMap<u16, String>> {
    let mut palette = BTreeMap::new();
    for (i, line) in text.trim_start_matches('\u{feff}').lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| SemanticsError::Palette {
                line: i + 1,
                reason: "expected id<TAB>name".into(),
            })?;
        let id: u16 = id.trim().parse().map_err(|_| SemanticsError::Palette {
            line: i + 1,
            reason: format!("bad class id {id:?}"),
        })?;
        palette.insert(id, name.trim().to_string());
    }
    Ok(palette)
}

pub fn load_palette(path: &Path) -> Result<BTreeMap<u16, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| SemanticsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_palette(&text)
}

/// Loads a single-channel label PNG and validates it against a palette file.
pub fn load_semantic_map(label_path: &Path, palette_path: &Path) -> Result<SemanticMap> {
    let palette = load_palette(palette_path)?;
    load_semantic_map_with(label_path, &palette)
}

pub fn load_semantic_map_with(
    label_path: &Path,
    palette: &BTreeMap<u16, String>,
) -> Result<SemanticMap> {
    let (w, h, labels) = raster::load_gray_u16(label_path)?;
    SemanticMap::new(w, h, labels, palette.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultRule {
    Allow,
    Deny,
}

/// Two-list classification of class names, plus the rule for unlisted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticPolicy {
    pub allow: BTreeSet<String>,
    pub deny: BTreeSet<String>,
    pub default: DefaultRule,
}

impl SemanticPolicy {
    pub fn new(
        allow: impl IntoIterator<Item = impl Into<String>>,
        deny: impl IntoIterator<Item = impl Into<String>>,
        default: DefaultRule,
    ) -> Result<Self> {
        let p = Self {
            allow: allow.into_iter().map(Into::into).collect(),
            deny: deny.into_iter().map(Into::into).collect(),
            default,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.allow.intersection(&self.deny).next() {
            return Err(SemanticsError::PolicyOverlap(c.clone()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SemanticPolicy = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SemanticsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The shipped policy: surfaces such as walls, signboards and tables are
    /// allowed; sky, people, animals, food and vegetation are denied.
    pub fn default_policy() -> Self {
        Self::from_json(include_str!("../assets/default_policy.json"))
            .expect("bundled policy is valid")
    }

    /// Swaps the two lists and the default rule.
    pub fn inverted(&self) -> Self {
        Self {
            allow: self.deny.clone(),
            deny: self.allow.clone(),
            default: match self.default {
                DefaultRule::Allow => DefaultRule::Deny,
                DefaultRule::Deny => DefaultRule::Allow,
            },
        }
    }

    pub fn allows(&self, class: &str) -> bool {
        if self.allow.contains(class) {
            true
        } else if self.deny.contains(class) {
            false
        } else {
            self.default == DefaultRule::Allow
        }
    }
}

pub fn semantic_mask(map: &SemanticMap, policy: &SemanticPolicy) -> BinaryMask {
    let allowed: BTreeMap<u16, bool> = map
        .palette
        .iter()
        .map(|(id, name)| (*id, policy.allows(name)))
        .collect();
    let bits = map.labels.iter().map(|id| allowed[id]).collect();
    BinaryMask::from_vec(map.width, map.height, bits).expect("labels sized by map invariant")
}

/// One 4-connected component of a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionComponent {
    pub id: usize,
    /// Pixel coordinates in discovery order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: Rect,
}

impl RegionComponent {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// 4-connected components with at least `min_area` pixels, numbered in
/// raster order of their first pixel.
pub fn connected_regions(mask: &BinaryMask, min_area: usize) -> Vec<RegionComponent> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for sy in 0..h {
        for sx in 0..w {
            if visited[sy * w + sx] || !mask.get(sx, sy) {
                continue;
            }
            visited[sy * w + sx] = true;
            queue.push_back((sx, sy));
            let mut pixels = Vec::new();
            let (mut x0, mut y0, mut x1, mut y1) = (sx, sy, sx, sy);
            while let Some((x, y)) = queue.pop_front() {
                pixels.push((x, y));
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
                let mut visit = |nx: usize, ny: usize| {
                    let i = ny * w + nx;
                    if !visited[i] && mask.get(nx, ny) {
                        visited[i] = true;
                        queue.push_back((nx, ny));
                    }
                };
                if x > 0 {
                    visit(x - 1, y);
                }
                if x + 1 < w {
                    visit(x + 1, y);
                }
                if y > 0 {
                    visit(x, y - 1);
                }
                if y + 1 < h {
                    visit(x, y + 1);
                }
            }
            if pixels.len() >= min_area {
                out.push(RegionComponent {
                    id: out.len(),
                    pixels,
                    bbox: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                });
            }
        }
    }
    out
}
