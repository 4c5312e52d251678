use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SynthConfig, SynthError};
use crate::rendering::TextInstance;

pub const ENGINE_VERSION: &str = concat!("textsynth/", env!("CARGO_PKG_VERSION"));

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Position in the attempt sequence; with the run seed it fixes `seed`.
    pub attempt: u64,
    pub background_id: String,
    pub seed: u64,
    pub image: String,
    pub annotations: String,
    pub instances: Vec<TextInstance>,
    #[serde(default)]
    pub debug_files: Vec<String>,
}

/// Record of one run: enough to regenerate every sample it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub config_hash: String,
    pub config: SynthConfig,
    pub requested: usize,
    pub samples: Vec<ManifestEntry>,
}

impl RunManifest {
    /// Every file the run wrote besides the manifest itself.
    pub fn listed_files(&self) -> Vec<&str> {
        self.samples
            .iter()
            .flat_map(|s| {
                [s.image.as_str(), s.annotations.as_str()]
                    .into_iter()
                    .chain(s.debug_files.iter().map(String::as_str))
            })
            .collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.samples.iter().find(|s| {
            s.id == id || s.image == id || id.parse::<usize>().is_ok_and(|i| s.id == sample_id(i))
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, dir: &Path) -> Result<(), SynthError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_json()).map_err(|source| SynthError::io(&path, source))
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::io(path, source))?;
        serde_json::from_str(&text)
            .map_err(|e| SynthError::Manifest(format!("{}: {e}", path.display())))
    }
}

pub fn sample_id(index: usize) -> String {
    format!("synth_{index:06}")
}
