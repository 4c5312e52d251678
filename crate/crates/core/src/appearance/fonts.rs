use std::path::{Path, PathBuf};
use std::sync::Arc;

use ab_glyph::FontArc;
use rand::Rng;

use super::AppearanceError;

/// A loaded scalable font and where it came from.
#[derive(Clone)]
pub struct FontEntry {
    pub path: PathBuf,
    pub style: String,
    font: Arc<FontArc>,
}

impl std::fmt::Debug for FontEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FontEntry")
            .field("path", &self.path)
            .field("style", &self.style)
            .finish()
    }
}

impl FontEntry {
    pub fn load(path: &Path) -> Result<Self, AppearanceError> {
        let bytes = std::fs::read(path).map_err(|source| AppearanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let font = FontArc::try_from_vec(bytes)
            .map_err(|_| AppearanceError::InvalidFont(path.display().to_string()))?;
        let style = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self {
            path: path.to_path_buf(),
            style,
            font: Arc::new(font),
        })
    }

    pub fn font(&self) -> &FontArc {
        &self.font
    }
}

/// The fonts text may be rendered in.
#[derive(Debug, Clone, Default)]
pub struct FontList {
    pub entries: Vec<FontEntry>,
}

impl FontList {
    pub fn from_paths<P: AsRef<Path>>(paths: &[P]) -> Result<Self, AppearanceError> {
        let entries = paths
            .iter()
            .map(|p| FontEntry::load(p.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() {
            return Err(AppearanceError::EmptyFontList);
        }
        Ok(Self { entries })
    }

    /// Every `.ttf`/`.otf` file directly inside `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Self, AppearanceError> {
        let rd = std::fs::read_dir(dir).map_err(|source| AppearanceError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ttf" | "otf"))
            })
            .collect();
        paths.sort();
        Self::from_paths(&paths)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, path: &Path) -> Option<&FontEntry> {
        self.entries.iter().find(|e| e.path == path)
    }
}

/// Uniform choice among the fonts.
pub fn pick_font<'a, R: Rng + ?Sized>(
    fonts: &'a FontList,
    rng: &mut R,
) -> Result<&'a FontEntry, AppearanceError> {
    if fonts.entries.is_empty() {
        return Err(AppearanceError::EmptyFontList);
    }
    Ok(&fonts.entries[rng.gen_range(0..fonts.entries.len())])
}
