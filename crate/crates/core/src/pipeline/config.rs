use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusSource, Granularity, DEFAULT_MIX_RATIO};
use crate::placement::PlacementShape;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {what} {path} does not exist")]
    MissingPath { what: &'static str, path: String },
}

fn default_max_instances() -> usize {
    5
}
fn default_mix_ratio() -> f64 {
    DEFAULT_MIX_RATIO
}
fn default_neighbors() -> usize {
    5
}
fn default_retry_budget() -> usize {
    4
}

/// Everything a synthesis run depends on. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Directory of background images (PNG or JPEG).
    pub backgrounds: PathBuf,
    /// Directory of label PNGs named after their background's stem.
    pub semantic_maps: PathBuf,
    /// Palette file; `<semantic_maps>/palette.txt` when absent.
    #[serde(default)]
    pub palette: Option<PathBuf>,
    /// Policy JSON; the built-in policy when absent.
    #[serde(default)]
    pub policy: Option<PathBuf>,
    pub appearance_db: PathBuf,
    pub fonts: PathBuf,
    #[serde(default)]
    pub corpus: Vec<CorpusSource>,
    /// Transcripts taken from the source dataset, mixed with `corpus`.
    #[serde(default)]
    pub transcripts: Vec<CorpusSource>,
    #[serde(default = "default_mix_ratio")]
    pub mix_ratio: f64,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default = "default_max_instances")]
    pub max_instances_per_image: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub debug_masks: bool,
    #[serde(default)]
    pub placement: PlacementShape,
    /// Neighbors retrieved per appearance query; one is used.
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    /// Extra passes over the backgrounds allowed for empty samples.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl SynthConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.backgrounds,
            &mut self.semantic_maps,
            &mut self.appearance_db,
            &mut self.fonts,
            &mut self.output,
        ] {
            resolve(base, p);
        }
        for p in [&mut self.palette, &mut self.policy].into_iter().flatten() {
            resolve(base, p);
        }
        for s in self.corpus.iter_mut().chain(self.transcripts.iter_mut()) {
            resolve(base, &mut s.path);
        }
    }

    pub fn palette_path(&self) -> PathBuf {
        self.palette
            .clone()
            .unwrap_or_else(|| self.semantic_maps.join("palette.txt"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.max_instances_per_image < 1 {
            return invalid("max_instances_per_image must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return invalid("mix_ratio must lie in [0, 1]");
        }
        if self.neighbors < 1 {
            return invalid("neighbors must be at least 1");
        }
        if self.corpus.is_empty() && self.transcripts.is_empty() {
            return invalid("no corpus or transcript files given");
        }
        let s = &self.placement;
        if s.aspect.is_nan() || s.aspect <= 0.0 || s.min_height < 8 || s.max_height < s.min_height {
            return invalid("placement needs aspect > 0 and 8 <= min_height <= max_height");
        }
        if s.ladder_factor.is_nan()
            || s.ladder_factor <= 1.0
            || !(0.0..=1.0).contains(&s.coverage_min)
            || !(0.0..=1.0).contains(&s.region_fraction)
        {
            return invalid("placement ladder_factor must exceed 1; coverage_min and region_fraction lie in [0, 1]");
        }
        if self.jobs == Some(0) {
            return invalid("jobs must be at least 1");
        }
        let must_exist = |what: &'static str, p: &Path, dir: bool| {
            if (dir && p.is_dir()) || (!dir && p.is_file()) {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    what,
                    path: p.display().to_string(),
                })
            }
        };
        must_exist("backgrounds directory", &self.backgrounds, true)?;
        must_exist("semantic map directory", &self.semantic_maps, true)?;
        must_exist("palette", &self.palette_path(), false)?;
        if let Some(p) = &self.policy {
            must_exist("policy", p, false)?;
        }
        must_exist("appearance database", &self.appearance_db, false)?;
        must_exist("font directory", &self.fonts, true)?;
        for c in self.corpus.iter().chain(&self.transcripts) {
            must_exist("corpus file", &c.path, false)?;
        }
        Ok(())
    }

    /// SHA-256 over the settings that influence output content. The output
    /// directory and worker count are left out.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.jobs = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "backgrounds": "bg", "semantic_maps": "maps", "appearance_db": "db.jsonl",
        "fonts": "fonts", "corpus": [{"path": "words.txt"}], "output": "out"
    }"#;

    #[test]
    fn defaults_and_resolution() {
        let mut c = SynthConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.max_instances_per_image, 5);
        assert_eq!(c.mix_ratio, 0.5);
        assert_eq!(c.granularity, Granularity::Word);
        c.resolve_paths(Path::new("/data"));
        assert_eq!(c.corpus[0].path, Path::new("/data/words.txt"));
        assert_eq!(c.palette_path(), Path::new("/data/maps/palette.txt"));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(SynthConfig::from_json(&MINIMAL.replace("\"output\"", "\"outptu\"")).is_err());
        let mut c = SynthConfig::from_json(MINIMAL).unwrap();
        c.max_instances_per_image = 0;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
        c.max_instances_per_image = 5;
        assert!(matches!(c.validate(), Err(ConfigError::MissingPath { .. })));
    }

    #[test]
    fn hash_ignores_output_and_jobs() {
        let a = SynthConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output = "elsewhere".into();
        b.jobs = Some(3);
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 1;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
