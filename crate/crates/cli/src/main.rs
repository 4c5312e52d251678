use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use textsynth::appearance::{build_database, GtFormat};
use textsynth::pipeline::{preview, run_synth, Replayer, RunManifest, SynthConfig, SynthError};
use textsynth::raster::save_png;

#[derive(Parser)]
#[command(name = "textsynth", version, about = "Scene-text image synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize annotated images as described by a config file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write semantic, saliency, eligibility and box overlays per sample.
        #[arg(long)]
        debug_masks: bool,
    },
    /// Build the appearance database from an annotated scene-text dataset.
    BuildStats {
        #[arg(long)]
        dataset: PathBuf,
        /// icdar-word or quad
        #[arg(long)]
        format: GtFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a sample's quads and transcripts over its image.
    Preview {
        #[arg(long)]
        manifest: PathBuf,
        /// Sample id (synth_000003), image name, or index.
        #[arg(long)]
        sample: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate every sample of a manifest and compare with the files on disk.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn fail(e: &SynthError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn synth(
    config: PathBuf,
    seed: Option<u64>,
    count: Option<usize>,
    jobs: Option<usize>,
    debug_masks: bool,
) -> ExitCode {
    let mut cfg = match SynthConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e.into()),
    };
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.count = count.unwrap_or(cfg.count);
    cfg.jobs = jobs.or(cfg.jobs);
    cfg.debug_masks |= debug_masks;
    match run_synth(&cfg) {
        Ok(m) => {
            let instances: usize = m.samples.iter().map(|s| s.instances.len()).sum();
            println!(
                "wrote {} samples ({instances} text instances) to {}",
                m.samples.len(),
                cfg.output.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn build_stats(dataset: PathBuf, format: GtFormat, out: PathBuf) -> anyhow::Result<()> {
    let build = build_database(&dataset, format)?;
    build.db.save(&out)?;
    println!(
        "{} records written to {}; {} annotations skipped",
        build.db.len(),
        out.display(),
        build.skipped.len()
    );
    Ok(())
}

fn verify(manifest: PathBuf) -> Result<usize, SynthError> {
    let m = RunManifest::load(&manifest)?;
    let n = m.samples.len();
    let dir = manifest.parent().map(PathBuf::from).unwrap_or_default();
    let bad = Replayer::new(m)?.verify(&dir)?;
    for id in &bad {
        eprintln!("mismatch: {id}");
    }
    println!("{} of {n} samples reproduced", n - bad.len());
    Ok(bad.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth {
            config,
            seed,
            count,
            jobs,
            debug_masks,
        } => synth(config, seed, count, jobs, debug_masks),
        Command::BuildStats {
            dataset,
            format,
            out,
        } => match build_stats(dataset, format, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Preview {
            manifest,
            sample,
            out,
        } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("preview_{sample}.png")));
            match preview(&manifest, &sample).and_then(|img| Ok(save_png(&img, &out)?)) {
                Ok(()) => {
                    println!("{}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { manifest } => match verify(manifest) {
            Ok(0) => ExitCode::SUCCESS,
            Ok(_) => ExitCode::FAILURE,
            Err(e) => fail(&e),
        },
    }
}
