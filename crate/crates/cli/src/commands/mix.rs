//! Pseudo-label generation from a parallel corpus.

use super::{ensure_output_dir, load_corpus, Ctx, Outcome};
use crate::MixArgs;
use anyhow::{Context, Result};
use imix_core::io;
use imix_core::mixer::generate_pseudo_dataset;

pub fn run(ctx: &Ctx, args: &MixArgs) -> Result<Outcome> {
    ctx.config.check_mixer()?;
    let index = load_corpus(&args.manifest)?;
    ensure_output_dir(ctx)?;

    let (labels, skips) = generate_pseudo_dataset(
        &index,
        ctx.config.mixer_count,
        ctx.config.mixer_distribution,
        ctx.config.mixer_seed,
    )
    .context("cannot generate pseudo-labels")?;

    io::write_pseudo_labels(&labels, &ctx.out_path("pseudo_labels.tsv"))?;
    io::write_skip_report(&skips, &ctx.out_path("skip_report.tsv"))?;

    println!(
        "mixed {} pseudo-labels ({} distribution, seed {}); {} pair(s) skipped",
        labels.len(),
        ctx.config.mixer_distribution,
        ctx.config.mixer_seed,
        skips.entries.len()
    );
    Ok(Outcome::Full)
}
