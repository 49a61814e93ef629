//! Command implementations and shared plumbing.

mod eval;
mod extract;
mod manifest;
mod mix;
mod plot;
mod train;

use crate::config::{config_err, ToolConfig};
use crate::{Cli, Command};
use anyhow::{bail, Context, Result};
use imix_core::io::ManifestRow;
use imix_core::mixer::{CorpusIndex, UtteranceRecord};
use std::path::{Path, PathBuf};

/// Whether a command completed for every row or only some of them.
pub enum Outcome {
    Full,
    Partial(String),
}

/// Resolved invocation context shared by every command.
pub struct Ctx {
    pub config: ToolConfig,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl Ctx {
    /// A rayon pool honoring `--jobs`; 0 threads means rayon's default.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .context("cannot build worker pool")
    }

    pub fn out_path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.output_dir.join(name)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut overrides: Vec<(String, String)> = Vec::new();
    match &cli.command {
        Command::Extract(args) => args.analysis.collect(&mut overrides),
        Command::Mix(args) => args.mixer.collect(&mut overrides),
        Command::Train(args) => args.adaptor.collect(&mut overrides),
        _ => {}
    }
    let config = ToolConfig::resolve(cli.config.as_deref(), cli.seed, &overrides)?;
    let ctx = Ctx {
        config,
        output_dir: cli.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Manifest(args) => manifest::run(&ctx, &args),
        Command::Extract(args) => extract::run(&ctx, &args),
        Command::Mix(args) => mix::run(&ctx, &args),
        Command::Train(args) => train::run(&ctx, &args),
        Command::Eval(args) => eval::run(&ctx, &args),
        Command::Plot(args) => plot::run(&ctx, &args),
    }
}

macro_rules! push_override {
    ($out:expr, $key:literal, $field:expr) => {
        if let Some(v) = &$field {
            $out.push(($key.to_string(), v.to_string()));
        }
    };
}

impl crate::AnalysisOverrides {
    fn collect(&self, out: &mut Vec<(String, String)>) {
        push_override!(out, "analysis.frame_length", self.frame_length);
        push_override!(out, "analysis.hop_length", self.hop_length);
        push_override!(out, "analysis.f0_min", self.f0_min);
        push_override!(out, "analysis.f0_max", self.f0_max);
        push_override!(out, "analysis.yin_threshold", self.yin_threshold);
        push_override!(out, "analysis.n_mels", self.n_mels);
        push_override!(out, "analysis.n_cepstra", self.n_cepstra);
    }
}

impl crate::MixerOverrides {
    fn collect(&self, out: &mut Vec<(String, String)>) {
        push_override!(out, "mixer.count", self.count);
        push_override!(out, "mixer.distribution", self.distribution);
        push_override!(out, "mixer.seed", self.seed);
    }
}

impl crate::AdaptorOverrides {
    fn collect(&self, out: &mut Vec<(String, String)>) {
        push_override!(out, "adaptor.embedding_dim", self.embedding_dim);
        push_override!(out, "adaptor.hidden_dim", self.hidden_dim);
        push_override!(out, "adaptor.lr_generator", self.lr_generator);
        push_override!(out, "adaptor.lr_discriminator", self.lr_discriminator);
        push_override!(out, "adaptor.batch_size", self.batch_size);
        push_override!(out, "adaptor.seed", self.seed);
        push_override!(out, "train.steps", self.steps);
        push_override!(out, "train.discriminator", self.discriminator);
    }
}

/// Joins `path` onto `base` unless it is already absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// The directory a manifest's relative paths are resolved against.
pub fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

pub fn read_manifest_rows(path: &Path) -> Result<Vec<ManifestRow>> {
    imix_core::io::read_manifest(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))
}

/// Loads the phoneme features of every manifest row into a corpus index.
/// Rows must have been processed by `extract`.
pub fn load_corpus(manifest: &Path) -> Result<CorpusIndex> {
    let rows = read_manifest_rows(manifest)?;
    let base = manifest_dir(manifest);
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let Some(features) = &row.features else {
            bail!(
                "manifest row {} has no extracted features; run `imix extract` first",
                row.utterance_id()
            );
        };
        let path = resolve(&base, features);
        let features = imix_core::io::read_phoneme_features(&path)
            .with_context(|| format!("cannot read features {}", path.display()))?;
        records.push(UtteranceRecord {
            speaker: row.speaker.clone(),
            sentence: row.sentence.clone(),
            emotion: row.emotion,
            features,
        });
    }
    CorpusIndex::new(records).context("manifest does not form a valid parallel corpus")
}

/// Shared guard: a command that writes into `--output-dir` must not be
/// handed a nonexistent parent tree it cannot create meaningfully.
pub fn ensure_output_dir(ctx: &Ctx) -> Result<()> {
    if ctx.output_dir.as_os_str().is_empty() {
        return config_err("--output-dir must not be empty");
    }
    std::fs::create_dir_all(&ctx.output_dir)
        .with_context(|| format!("cannot create output dir {}", ctx.output_dir.display()))?;
    Ok(())
}
