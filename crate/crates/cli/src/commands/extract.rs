//! Per-utterance feature extraction over a manifest.

use super::{ensure_output_dir, manifest_dir, read_manifest_rows, resolve, Ctx, Outcome};
use crate::ExtractArgs;
use anyhow::{bail, Context, Result};
use imix_core::align::{parse_alignment, phoneme_average};
use imix_core::audio::load_waveform;
use imix_core::io::{self, ManifestRow, TrackData};
use imix_core::signal::{compute_energy, compute_mel_cepstra, estimate_f0};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;

pub fn run(ctx: &Ctx, args: &ExtractArgs) -> Result<Outcome> {
    let rows = read_manifest_rows(&args.manifest)?;
    ensure_output_dir(ctx)?;
    let base = manifest_dir(&args.manifest);

    let pool = ctx.thread_pool()?;
    let results: Vec<Result<ManifestRow, String>> = pool.install(|| {
        rows.par_iter()
            .map(|row| {
                process_row(ctx, &base, row)
                    .map_err(|e| format!("{}: {e:#}", row.utterance_id()))
            })
            .collect()
    });

    let mut updated = Vec::new();
    let mut failures = Vec::new();
    for (row, result) in rows.iter().zip(results) {
        match result {
            Ok(r) => updated.push(r),
            Err(detail) => {
                eprintln!("imix: extract failed for {detail}");
                failures.push((row.utterance_id(), detail));
            }
        }
    }
    if updated.is_empty() {
        bail!("extraction failed for every row ({} failures)", failures.len());
    }

    let mut report = String::from("# utterance\terror\n");
    for (id, detail) in &failures {
        let flat = detail.replace(['\t', '\n', '\r'], " ");
        writeln!(report, "{id}\t{flat}").expect("string write");
    }
    io::write_atomic(&ctx.out_path("extract_errors.tsv"), report.as_bytes())?;
    io::write_manifest(&updated, &ctx.out_path("manifest.tsv"))?;

    println!(
        "extracted {} of {} utterances into {}",
        updated.len(),
        rows.len(),
        ctx.output_dir.display()
    );
    if failures.is_empty() {
        Ok(Outcome::Full)
    } else {
        Ok(Outcome::Partial(format!(
            "{} of {} rows failed; see extract_errors.tsv",
            failures.len(),
            rows.len()
        )))
    }
}

/// Extracts one utterance and writes its three feature files, returning
/// the manifest row updated with paths relative to the output manifest.
fn process_row(ctx: &Ctx, base: &std::path::Path, row: &ManifestRow) -> Result<ManifestRow> {
    let audio_path = resolve(base, &row.audio);
    let alignment_path = resolve(base, &row.alignment);

    let waveform = load_waveform(&audio_path)?;
    ctx.config.check_analysis(waveform.sample_rate())?;
    let alignment_text = std::fs::read_to_string(&alignment_path)
        .with_context(|| format!("cannot read alignment {}", alignment_path.display()))?;
    let alignment = parse_alignment(&alignment_text)?;

    let cfg = &ctx.config.analysis;
    let f0 = estimate_f0(&waveform, cfg)?;
    let energy = compute_energy(&waveform, cfg)?;
    let mel = compute_mel_cepstra(&waveform, cfg)?;
    let features = phoneme_average(&f0, &energy, &alignment, cfg)?;

    let rel_dir = PathBuf::from("features")
        .join(&row.speaker)
        .join(row.emotion.to_string());
    let rel = |ext: &str| rel_dir.join(format!("{}.{ext}", row.sentence));
    let feat_rel = rel("feat.tsv");
    let trk_rel = rel("trk.tsv");
    let mel_rel = rel("mel.imx");

    io::write_phoneme_features(&features, &ctx.out_path(&feat_rel))?;
    io::write_scalar_tracks(&f0, &energy, &ctx.out_path(&trk_rel))?;
    io::write_track_binary(&TrackData::Mel(mel), &ctx.out_path(&mel_rel))?;

    Ok(ManifestRow {
        audio: std::path::absolute(&audio_path)?,
        alignment: std::path::absolute(&alignment_path)?,
        features: Some(feat_rel),
        tracks: Some(trk_rel),
        mel: Some(mel_rel),
        ..row.clone()
    })
}
