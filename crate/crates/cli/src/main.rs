//! `imix` — batch pipeline for prosody feature extraction, intensity
//! mixing, adaptor training, and evaluation.
//!
//! Exit codes: 0 success, 2 partial failure (some rows failed, the rest
//! were processed), 3 configuration/usage error, 4 training divergence,
//! 1 any other error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::ConfigError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "imix",
    version,
    about = "Emotional-prosody intensity toolkit: extract features, mix pseudo-labels, train the variance adaptor, and evaluate"
)]
struct Cli {
    /// Flat key-value config file (`section.key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Overrides both mixer.seed and adaptor.seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for per-utterance stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Directory that receives all outputs (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus manifest from a speaker/emotion directory tree.
    Manifest(ManifestArgs),
    /// Extract F0, energy, mel-cepstra, and phoneme features per utterance.
    Extract(ExtractArgs),
    /// Generate intensity-interpolated pseudo-labels from parallel speech.
    Mix(MixArgs),
    /// Train the variance adaptor on categorical plus pseudo-label data.
    Train(TrainArgs),
    /// Compare two extracted corpora: MCD, F0 RMSE, and mel MAE.
    Eval(EvalArgs),
    /// Export pitch contours as plot-ready CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ManifestArgs {
    /// Corpus root laid out as <root>/<speaker>/<emotion>/<sentence>.wav
    /// with a same-named .tsv alignment next to each wav.
    root: PathBuf,

    /// Output manifest path (default: <root>/manifest.tsv).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct AnalysisOverrides {
    #[arg(long = "analysis.frame_length", value_name = "SAMPLES")]
    frame_length: Option<usize>,
    #[arg(long = "analysis.hop_length", value_name = "SAMPLES")]
    hop_length: Option<usize>,
    #[arg(long = "analysis.f0_min", value_name = "HZ")]
    f0_min: Option<f64>,
    #[arg(long = "analysis.f0_max", value_name = "HZ")]
    f0_max: Option<f64>,
    #[arg(long = "analysis.yin_threshold", value_name = "X")]
    yin_threshold: Option<f64>,
    #[arg(long = "analysis.n_mels", value_name = "N")]
    n_mels: Option<usize>,
    #[arg(long = "analysis.n_cepstra", value_name = "N")]
    n_cepstra: Option<usize>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus manifest (see `imix manifest`).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    #[command(flatten)]
    analysis: AnalysisOverrides,
}

#[derive(Args, Default)]
struct MixerOverrides {
    #[arg(long = "mixer.count", value_name = "N")]
    count: Option<usize>,
    /// beta, uniform, or discrete.
    #[arg(long = "mixer.distribution", value_name = "NAME")]
    distribution: Option<String>,
    // Distinct clap id so the global --seed still propagates into `mix`.
    #[arg(id = "mixer_seed", long = "mixer.seed", value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct MixArgs {
    /// Manifest updated by `imix extract` (feature paths present).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    #[command(flatten)]
    mixer: MixerOverrides,
}

#[derive(Args, Default)]
struct AdaptorOverrides {
    #[arg(long = "adaptor.embedding_dim", value_name = "N")]
    embedding_dim: Option<usize>,
    #[arg(long = "adaptor.hidden_dim", value_name = "N")]
    hidden_dim: Option<usize>,
    #[arg(long = "adaptor.lr_generator", value_name = "X")]
    lr_generator: Option<f64>,
    #[arg(long = "adaptor.lr_discriminator", value_name = "X")]
    lr_discriminator: Option<f64>,
    #[arg(long = "adaptor.batch_size", value_name = "N")]
    batch_size: Option<usize>,
    // Distinct clap id so the global --seed still propagates into `train`.
    #[arg(id = "adaptor_seed", long = "adaptor.seed", value_name = "N")]
    seed: Option<u64>,
    #[arg(long = "train.steps", value_name = "N")]
    steps: Option<u64>,
    #[arg(long = "train.discriminator", value_name = "BOOL")]
    discriminator: Option<bool>,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest updated by `imix extract`.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Pseudo-label dataset from `imix mix`.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,

    /// Continue from an existing checkpoint (its config wins).
    #[arg(long, value_name = "FILE")]
    resume: Option<PathBuf>,

    /// Ablation: drop the adversarial terms and discriminator updates.
    #[arg(long)]
    no_discriminator: bool,

    /// Shorthand for --train.steps.
    #[arg(long = "steps", value_name = "N", conflicts_with = "steps")]
    steps_short: Option<u64>,

    #[command(flatten)]
    adaptor: AdaptorOverrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Reference corpus manifest (extracted).
    #[arg(long, value_name = "FILE")]
    reference: PathBuf,

    /// Candidate corpus manifest (extracted).
    #[arg(long, value_name = "FILE")]
    candidate: PathBuf,

    /// Conditioning intensity the candidate corpus represents; recorded
    /// in the metric rows.
    #[arg(long, value_name = "X")]
    lambda: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Manifest to pull tracks from (with --speaker and --sentence).
    #[arg(long, value_name = "FILE", requires_all = ["speaker", "sentence"])]
    manifest: Option<PathBuf>,

    #[arg(long, value_name = "ID")]
    speaker: Option<String>,

    #[arg(long, value_name = "ID")]
    sentence: Option<String>,

    /// Track table file (repeatable); pairs with --label.
    #[arg(long, value_name = "FILE")]
    track: Vec<PathBuf>,

    /// Label for the corresponding --track (repeatable).
    #[arg(long, value_name = "NAME")]
    label: Vec<String>,

    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print and succeed; everything else
            // is a usage problem and shares the configuration exit code.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match commands::run(cli) {
        Ok(commands::Outcome::Full) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial(msg)) => {
            eprintln!("imix: partial failure: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("imix: error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Distinct exit codes for configuration errors and divergence.
fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 3;
        }
        if let Some(imix_core::error::Error::Divergence { .. }) =
            cause.downcast_ref::<imix_core::error::Error>()
        {
            return 4;
        }
    }
    1
}
