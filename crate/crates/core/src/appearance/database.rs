use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_record, parse_ground_truth, AppearanceError, AppearanceRecord, GtFormat, HOG_LEN,
};
use crate::raster::load_rgb;

/// Tag naming the descriptor and statistics recipe. Databases written under a
/// different tag are rejected on load.
pub const DATABASE_VERSION: &str = "hog32-c8-o9-b2s1-l2hys/lab-otsu-ring0.5/v1";

/// Descriptor/statistics pairs, ordered by `source_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceDatabase {
    pub version: String,
    pub records: Vec<AppearanceRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: String,
    dim: usize,
    records: usize,
}

impl AppearanceDatabase {
    pub fn new(mut records: Vec<AppearanceRecord>) -> Result<Self, AppearanceError> {
        if records.is_empty() {
            return Err(AppearanceError::EmptyDatabase);
        }
        records.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        Ok(Self {
            version: DATABASE_VERSION.to_string(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Line-delimited JSON: a header line, then one record per line.
    pub fn write_to<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        let header = Header {
            version: self.version.clone(),
            dim: HOG_LEN,
            records: self.records.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, AppearanceError> {
        let mut lines = BufReader::new(r).lines();
        let io = |source| AppearanceError::Io {
            path: "<database>".into(),
            source,
        };
        let first = lines
            .next()
            .ok_or(AppearanceError::EmptyDatabase)?
            .map_err(io)?;
        let header: Header = serde_json::from_str(&first)
            .map_err(|source| AppearanceError::Format { line: 1, source })?;
        if header.version != DATABASE_VERSION || header.dim != HOG_LEN {
            return Err(AppearanceError::StaleDatabase {
                found: header.version,
                expected: DATABASE_VERSION.into(),
            });
        }
        let mut records = Vec::with_capacity(header.records);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AppearanceRecord =
                serde_json::from_str(&line).map_err(|source| AppearanceError::Format {
                    line: i + 2,
                    source,
                })?;
            if rec.h_b.len() != HOG_LEN {
                return Err(AppearanceError::StaleDatabase {
                    found: format!("descriptor length {}", rec.h_b.len()),
                    expected: DATABASE_VERSION.into(),
                });
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(AppearanceError::EmptyDatabase);
        }
        Ok(Self {
            version: header.version,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AppearanceError> {
        let io = |source| AppearanceError::Io {
            path: path.display().to_string(),
            source,
        };
        let f = std::fs::File::create(path).map_err(io)?;
        self.write_to(f).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, AppearanceError> {
        let f = std::fs::File::open(path).map_err(|source| AppearanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_from(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedAnnotation {
    pub source_id: String,
    pub reason: String,
}

/// Outcome of [`build_database`]: the database and every annotation left out.
#[derive(Debug, Clone)]
pub struct DatabaseBuild {
    pub db: AppearanceDatabase,
    pub skipped: Vec<SkippedAnnotation>,
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Pairs every image under `root` (or `root/images`) with its ground-truth
/// file `gt_<stem>.txt`, looked up in `root/gt`, next to the image, then as
/// `root/gt/<stem>.txt`.
pub fn discover_dataset(root: &Path) -> Result<Vec<(PathBuf, Option<PathBuf>)>, AppearanceError> {
    let image_dir = if root.join("images").is_dir() {
        root.join("images")
    } else {
        root.to_path_buf()
    };
    let rd = std::fs::read_dir(&image_dir).map_err(|source| AppearanceError::Io {
        path: image_dir.display().to_string(),
        source,
    })?;
    let mut images: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    images.sort();
    Ok(images
        .into_iter()
        .map(|img| {
            let stem = img
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let name = format!("gt_{stem}.txt");
            let gt = [
                root.join("gt").join(&name),
                image_dir.join(&name),
                root.join("gt").join(format!("{stem}.txt")),
            ]
            .into_iter()
            .find(|p| p.is_file());
            (img, gt)
        })
        .collect())
}

/// Builds the database from an annotated scene-text dataset. Annotations that
/// cannot produce a record are logged and listed in the result.
pub fn build_database(root: &Path, format: GtFormat) -> Result<DatabaseBuild, AppearanceError> {
    let pairs = discover_dataset(root)?;
    let per_image: Vec<(Vec<AppearanceRecord>, Vec<SkippedAnnotation>)> = pairs
        .par_iter()
        .map(|(img_path, gt_path)| {
            let name = img_path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let skip_all = |reason: String| {
                (
                    Vec::new(),
                    vec![SkippedAnnotation {
                        source_id: name.clone(),
                        reason,
                    }],
                )
            };
            let Some(gt_path) = gt_path else {
                return skip_all("no ground-truth file".into());
            };
            let img = match load_rgb(img_path) {
                Ok(i) => i,
                Err(e) => return skip_all(e.to_string()),
            };
            let text = match std::fs::read_to_string(gt_path) {
                Ok(t) => t,
                Err(e) => return skip_all(format!("{}: {e}", gt_path.display())),
            };
            let anns = match parse_ground_truth(&text, format) {
                Ok(a) => a,
                Err(e) => return skip_all(e.to_string()),
            };
            let mut records = Vec::new();
            let mut skipped = Vec::new();
            for (i, ann) in anns.iter().enumerate() {
                let source_id = format!("{name}#{i:04}");
                let bbox = ann.quad.bounding_rect(img.width(), img.height());
                match build_record(&img, bbox, &source_id) {
                    Ok(r) => records.push(r),
                    Err(e) => skipped.push(SkippedAnnotation {
                        source_id,
                        reason: e.to_string(),
                    }),
                }
            }
            (records, skipped)
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (r, s) in per_image {
        records.extend(r);
        skipped.extend(s);
    }
    skipped.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    for s in &skipped {
        log::warn!("skipping {}: {}", s.source_id, s.reason);
    }
    Ok(DatabaseBuild {
        db: AppearanceDatabase::new(records)?,
        skipped,
    })
}
