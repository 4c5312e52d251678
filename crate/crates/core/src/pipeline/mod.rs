//! End-to-end synthesis: per-background analysis, instance embedding, batch
//! runs with a replayable manifest, and preview overlays.

mod config;
mod manifest;
mod preview;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{ConfigError, SynthConfig};
pub use manifest::{sample_id, ManifestEntry, RunManifest, ENGINE_VERSION, MANIFEST_FILE};
pub use preview::{bresenham, draw_overlay, preview, Segment, LABEL_PX, OVERLAY_COLOR};

use crate::appearance::{
    background_descriptor, pick_font, query_nearest, sample_text_color, AppearanceDatabase,
    FontList,
};
use crate::corpus::{load_corpus, MixedCorpus};
use crate::placement::{
    combine_masks, find_placements, quad_coverage, select_placements, splitmix64, EligibilityMask,
    SELECTION_TEMPERATURE,
};
use crate::raster::{
    encode_png, load_rgb, sobel_gradients, to_gray, BinaryMask, GradientField, RasterError,
    RasterImage,
};
use crate::rendering::{
    composite_in_place, emit_annotations, placed_quad, rasterize_to_fit, SynthesizedSample,
    TextInstance,
};
use crate::saliency::{
    compute_saliency, low_saliency_mask, SaliencyError, SaliencyMap, SaliencyMask,
};
use crate::semantics::{
    load_palette, load_semantic_map_with, semantic_mask, SemanticPolicy, SemanticsError,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Resource(String),
    #[error("no text could be placed on {0}")]
    EmptySample(String),
    #[error("produced {achieved} of {requested} requested samples")]
    ShortRun { achieved: usize, requested: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("replay: {0}")]
    Replay(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
}

impl SynthError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SynthError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SynthError::Config(_) | SynthError::Resource(_) => 3,
            SynthError::ShortRun { .. } => 2,
            _ => 1,
        }
    }
}

/// Seed of the `attempt`-th sample: the `attempt`-th output of a splitmix64
/// stream started at `seed`.
pub fn sample_seed(seed: u64, attempt: u64) -> u64 {
    splitmix64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Background {
    pub id: String,
    pub image: PathBuf,
    pub labels: PathBuf,
}

/// Inputs shared read-only by every sample of a run.
#[derive(Debug)]
pub struct SynthResources {
    pub policy: SemanticPolicy,
    pub palette: BTreeMap<u16, String>,
    pub db: AppearanceDatabase,
    pub fonts: FontList,
    pub corpus: MixedCorpus,
    pub backgrounds: Vec<Background>,
}

fn resource<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> SynthError + '_ {
    move |e| SynthError::Resource(format!("{what}: {e}"))
}

/// Backgrounds in file-name order, each paired with `<stem>.png` from the
/// semantic map directory.
pub fn discover_backgrounds(cfg: &SynthConfig) -> Result<Vec<Background>, SynthError> {
    let rd =
        std::fs::read_dir(&cfg.backgrounds).map_err(|e| SynthError::io(&cfg.backgrounds, e))?;
    let mut images: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                    matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg")
                })
        })
        .collect();
    images.sort();
    images
        .into_iter()
        .map(|image| {
            let stem = image
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let labels = cfg.semantic_maps.join(format!("{stem}.png"));
            if !labels.is_file() {
                return Err(SynthError::Resource(format!(
                    "background {} has no semantic map {}",
                    image.display(),
                    labels.display()
                )));
            }
            Ok(Background {
                id: image
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                image,
                labels,
            })
        })
        .collect()
}

impl SynthResources {
    pub fn load(cfg: &SynthConfig) -> Result<Self, SynthError> {
        let policy = match &cfg.policy {
            Some(p) => SemanticPolicy::load(p).map_err(resource("policy"))?,
            None => SemanticPolicy::default_policy(),
        };
        let palette = load_palette(&cfg.palette_path()).map_err(resource("palette"))?;
        let db = AppearanceDatabase::load(&cfg.appearance_db)
            .map_err(resource("appearance database"))?;
        let fonts = FontList::load_dir(&cfg.fonts).map_err(resource("fonts"))?;
        let corpus = MixedCorpus {
            transcripts: load_corpus(&cfg.transcripts, cfg.granularity)
                .map_err(resource("transcripts"))?,
            external: load_corpus(&cfg.corpus, cfg.granularity).map_err(resource("corpus"))?,
            ratio: cfg.mix_ratio,
        };
        if corpus.is_empty() {
            return Err(SynthError::Resource("corpus has no usable text".into()));
        }
        let backgrounds = discover_backgrounds(cfg)?;
        if backgrounds.is_empty() {
            return Err(SynthError::Resource(format!(
                "no backgrounds in {}",
                cfg.backgrounds.display()
            )));
        }
        Ok(Self {
            policy,
            palette,
            db,
            fonts,
            corpus,
            backgrounds,
        })
    }
}

/// Everything about a background that does not depend on the sample seed.
#[derive(Debug, Clone)]
pub struct BackgroundAnalysis {
    pub image: RasterImage,
    pub semantic: BinaryMask,
    pub saliency: SaliencyMap,
    pub low_saliency: SaliencyMask,
    pub eligibility: EligibilityMask,
    pub gradients: GradientField,
}

pub fn analyze(image: RasterImage, semantic: BinaryMask) -> Result<BackgroundAnalysis, SynthError> {
    let saliency = compute_saliency(&image)?;
    let low_saliency = low_saliency_mask(&saliency);
    let eligibility =
        combine_masks(&semantic, &low_saliency).map_err(|e| SynthError::Resource(e.to_string()))?;
    let gradients = sobel_gradients(&to_gray(&image))?;
    Ok(BackgroundAnalysis {
        image,
        semantic,
        saliency,
        low_saliency,
        eligibility,
        gradients,
    })
}

pub fn analyze_background(
    bg: &Background,
    res: &SynthResources,
) -> Result<BackgroundAnalysis, SynthError> {
    let image = load_rgb(&bg.image)?;
    let map = load_semantic_map_with(&bg.labels, &res.palette)?;
    map.check_pairing(image.width(), image.height())?;
    analyze(image, semantic_mask(&map, &res.policy))
}

/// Embeds up to `max_instances_per_image` texts into one background.
///
/// Each instance is checked against the eligibility mask as it stands after
/// the previous instances were carved out of it; instances that no longer fit
/// are dropped. Fails with `EmptySample` when nothing was placed.
pub fn synthesize_one(
    background_id: &str,
    analysis: &BackgroundAnalysis,
    res: &SynthResources,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<SynthesizedSample, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = &cfg.placement;
    let (w, h) = (analysis.image.width(), analysis.image.height());
    let cands = find_placements(
        &analysis.eligibility,
        &analysis.saliency,
        &analysis.gradients,
        shape,
        &mut rng,
    );
    let picks = select_placements(
        &cands,
        cfg.max_instances_per_image,
        SELECTION_TEMPERATURE,
        &mut rng,
    );
    let mut image = analysis.image.clone();
    let mut elig = analysis.eligibility.clone();
    let mut instances: Vec<TextInstance> = Vec::new();
    for p in picks {
        let text = res
            .corpus
            .sample(&mut rng)
            .map_err(resource("corpus"))?
            .to_string();
        let font = pick_font(&res.fonts, &mut rng).map_err(resource("fonts"))?;
        let h_s = match background_descriptor(&analysis.image, p.quad().bounding_rect(w, h)) {
            Ok(d) => d,
            Err(e) => {
                log::debug!("{background_id}: skipping placement: {e}");
                continue;
            }
        };
        let near = query_nearest(&res.db, &h_s, cfg.neighbors);
        let record = near[rng.gen_range(0..near.len())].record;
        let color = sample_text_color(record, &mut rng);
        let layout = match rasterize_to_fit(&text, font, p.width, p.height) {
            Ok(l) => l,
            Err(e) => {
                log::debug!("{background_id}: skipping {text:?}: {e}");
                continue;
            }
        };
        let quad = placed_quad(&layout, &p);
        let fits = quad.in_bounds(w, h)
            && quad_coverage(&elig.mask, &quad) >= shape.coverage_min
            && instances.iter().all(|i| i.quad.iou(&quad) < shape.max_iou);
        if !fits {
            log::debug!("{background_id}: ink quad for {text:?} left the eligible area");
            continue;
        }
        composite_in_place(&mut image, &layout, color, &p);
        elig.carve(&quad);
        instances.push(TextInstance {
            text,
            font: font
                .path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            px_height: layout.px_height,
            color,
            placement: p,
            quad,
            record_source_id: record.source_id.clone(),
        });
    }
    if instances.is_empty() {
        return Err(SynthError::EmptySample(background_id.to_string()));
    }
    Ok(SynthesizedSample {
        image,
        instances,
        seed,
        background_id: background_id.to_string(),
    })
}

/// Per-run memo of background analyses, filled on first use.
pub struct AnalysisCache {
    slots: Vec<OnceLock<Result<Arc<BackgroundAnalysis>, String>>>,
}

impl AnalysisCache {
    pub fn new(res: &SynthResources) -> Self {
        Self {
            slots: (0..res.backgrounds.len())
                .map(|_| OnceLock::new())
                .collect(),
        }
    }

    pub fn get(
        &self,
        res: &SynthResources,
        index: usize,
    ) -> Result<Arc<BackgroundAnalysis>, SynthError> {
        self.slots[index]
            .get_or_init(|| {
                analyze_background(&res.backgrounds[index], res)
                    .map(Arc::new)
                    .map_err(|e| format!("{}: {e}", res.backgrounds[index].id))
            })
            .clone()
            .map_err(SynthError::Resource)
    }
}

fn attempt_sample(
    attempt: u64,
    res: &SynthResources,
    cache: &AnalysisCache,
    cfg: &SynthConfig,
) -> Result<(SynthesizedSample, Arc<BackgroundAnalysis>), SynthError> {
    let index = (attempt % res.backgrounds.len() as u64) as usize;
    let analysis = cache.get(res, index)?;
    let sample = synthesize_one(
        &res.backgrounds[index].id,
        &analysis,
        res,
        cfg,
        sample_seed(cfg.seed, attempt),
    )?;
    Ok((sample, analysis))
}

fn is_run_output(name: &str) -> bool {
    name == MANIFEST_FILE
        || (name.starts_with("synth_") && name.ends_with(".png"))
        || (name.starts_with("gt_synth_") && name.ends_with(".txt"))
        || (name.starts_with("debug_synth_") && name.ends_with(".png"))
}

/// Removes files a previous run left in `dir`, so the directory matches the
/// new manifest exactly.
fn clear_run_outputs(dir: &Path) -> Result<(), SynthError> {
    let rd = std::fs::read_dir(dir).map_err(|e| SynthError::io(dir, e))?;
    for e in rd.filter_map(Result::ok) {
        let p = e.path();
        if p.is_file() && is_run_output(&e.file_name().to_string_lossy()) {
            std::fs::remove_file(&p).map_err(|err| SynthError::io(&p, err))?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    std::fs::write(path, bytes).map_err(|e| SynthError::io(path, e))
}

fn write_sample(
    dir: &Path,
    index: usize,
    attempt: u64,
    sample: &SynthesizedSample,
    analysis: &BackgroundAnalysis,
    debug: bool,
) -> Result<ManifestEntry, SynthError> {
    let id = sample_id(index);
    let image = format!("{id}.png");
    let annotations = format!("gt_{id}.txt");
    write_file(&dir.join(&image), &encode_png(&sample.image)?)?;
    write_file(
        &dir.join(&annotations),
        emit_annotations(&sample.instances).as_bytes(),
    )?;
    let mut debug_files = Vec::new();
    if debug {
        let boxes = draw_overlay(
            &analysis.eligibility.mask.to_image(),
            &sample.instances,
            None,
        )
        .0;
        for (kind, img) in [
            ("semantic", analysis.semantic.to_image()),
            ("saliency", analysis.saliency.to_image()),
            ("eligibility", analysis.eligibility.mask.to_image()),
            ("boxes", boxes),
        ] {
            let name = format!("debug_{id}_{kind}.png");
            write_file(&dir.join(&name), &encode_png(&img)?)?;
            debug_files.push(name);
        }
    }
    Ok(ManifestEntry {
        id,
        attempt,
        background_id: sample.background_id.clone(),
        seed: sample.seed,
        image,
        annotations,
        instances: sample.instances.clone(),
        debug_files,
    })
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, SynthError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| SynthError::Resource(format!("worker pool: {e}")))
}

/// Runs a whole synthesis job and writes images, annotations and the manifest
/// into `cfg.output`.
///
/// Attempt `i` uses background `i mod n` with seed `sample_seed(seed, i)`.
/// Attempts run in parallel batches, but samples are accepted strictly in
/// attempt order, so the output does not depend on the worker count. Gives
/// up with `ShortRun` after `count + n * retry_budget` attempts.
pub fn run_synth(cfg: &SynthConfig) -> Result<RunManifest, SynthError> {
    cfg.validate()?;
    let res = SynthResources::load(cfg)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| SynthError::io(&cfg.output, e))?;
    clear_run_outputs(&cfg.output)?;
    let pool = thread_pool(cfg.jobs)?;
    let cache = AnalysisCache::new(&res);
    let max_attempts = (cfg.count + res.backgrounds.len() * cfg.retry_budget) as u64;
    let batch = (pool.current_num_threads() * 2).max(4) as u64;
    let mut samples = Vec::with_capacity(cfg.count);
    let mut next = 0u64;
    while samples.len() < cfg.count && next < max_attempts {
        let want = (cfg.count - samples.len()) as u64;
        let end = (next + batch.max(want.min(batch * 4))).min(max_attempts);
        let results: Vec<_> = pool.install(|| {
            (next..end)
                .into_par_iter()
                .map(|a| (a, attempt_sample(a, &res, &cache, cfg)))
                .collect()
        });
        for (attempt, r) in results {
            if samples.len() == cfg.count {
                break;
            }
            match r {
                Ok((sample, analysis)) => {
                    let entry = write_sample(
                        &cfg.output,
                        samples.len(),
                        attempt,
                        &sample,
                        &analysis,
                        cfg.debug_masks,
                    )?;
                    samples.push(entry);
                }
                Err(SynthError::EmptySample(bg)) => {
                    log::info!("attempt {attempt}: nothing placed on {bg}; skipped")
                }
                Err(e) => return Err(e),
            }
        }
        next = end;
    }
    let manifest = RunManifest {
        engine_version: ENGINE_VERSION.to_string(),
        config_hash: cfg.content_hash(),
        config: cfg.clone(),
        requested: cfg.count,
        samples,
    };
    manifest.save(&cfg.output)?;
    if manifest.samples.len() < cfg.count {
        return Err(SynthError::ShortRun {
            achieved: manifest.samples.len(),
            requested: cfg.count,
        });
    }
    Ok(manifest)
}

/// Regenerated PNG bytes and annotation text for one manifest entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayedSample {
    pub png: Vec<u8>,
    pub annotations: String,
}

/// Regenerates samples of a manifest from its recorded config and seeds.
pub struct Replayer {
    manifest: RunManifest,
    res: SynthResources,
    cache: AnalysisCache,
}

impl Replayer {
    pub fn new(manifest: RunManifest) -> Result<Self, SynthError> {
        if manifest.engine_version != ENGINE_VERSION {
            return Err(SynthError::Replay(format!(
                "manifest written by {}, this is {ENGINE_VERSION}",
                manifest.engine_version
            )));
        }
        if manifest.config.content_hash() != manifest.config_hash {
            return Err(SynthError::Replay(
                "config does not match the recorded hash".into(),
            ));
        }
        let res = SynthResources::load(&manifest.config)?;
        let cache = AnalysisCache::new(&res);
        Ok(Self {
            manifest,
            res,
            cache,
        })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn replay(&self, entry: &ManifestEntry) -> Result<ReplayedSample, SynthError> {
        let index = self
            .res
            .backgrounds
            .iter()
            .position(|b| b.id == entry.background_id)
            .ok_or_else(|| {
                SynthError::Replay(format!("background {} is gone", entry.background_id))
            })?;
        let analysis = self.cache.get(&self.res, index)?;
        let sample = synthesize_one(
            &entry.background_id,
            &analysis,
            &self.res,
            &self.manifest.config,
            entry.seed,
        )?;
        Ok(ReplayedSample {
            png: encode_png(&sample.image)?,
            annotations: emit_annotations(&sample.instances),
        })
    }

    /// Ids of the entries whose regenerated outputs differ from the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, SynthError> {
        let results: Vec<Result<Option<String>, SynthError>> = self
            .manifest
            .samples
            .par_iter()
            .map(|e| {
                let r = self.replay(e)?;
                let png = std::fs::read(dir.join(&e.image))
                    .map_err(|err| SynthError::io(&dir.join(&e.image), err))?;
                let gt = std::fs::read_to_string(dir.join(&e.annotations))
                    .map_err(|err| SynthError::io(&dir.join(&e.annotations), err))?;
                Ok((png != r.png || gt != r.annotations).then(|| e.id.clone()))
            })
            .collect();
        let mut bad = Vec::new();
        for r in results {
            bad.extend(r?);
        }
        Ok(bad)
    }
}
