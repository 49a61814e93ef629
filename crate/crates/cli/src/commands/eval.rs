//! Corpus-vs-corpus evaluation: MCD, F0 RMSE, mel MAE.

use super::{ensure_output_dir, manifest_dir, read_manifest_rows, resolve, Ctx, Outcome};
use crate::EvalArgs;
use anyhow::{anyhow, bail, Context, Result};
use imix_core::io::{self, ManifestRow, MetricRow, TrackData};
use imix_core::metrics::evaluate_pair;
use imix_core::mixer::EmotionLabel;
use imix_core::signal::{F0Track, MelCepstraTrack};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn run(ctx: &Ctx, args: &EvalArgs) -> Result<Outcome> {
    let ref_rows = read_manifest_rows(&args.reference)?;
    let cand_rows = read_manifest_rows(&args.candidate)?;
    ensure_output_dir(ctx)?;
    let ref_base = manifest_dir(&args.reference);
    let cand_base = manifest_dir(&args.candidate);

    let cand_index: BTreeMap<(String, String, EmotionLabel), &ManifestRow> = cand_rows
        .iter()
        .map(|r| ((r.speaker.clone(), r.sentence.clone(), r.emotion), r))
        .collect();

    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for r in &ref_rows {
        let key = (r.speaker.clone(), r.sentence.clone(), r.emotion);
        match cand_index.get(&key) {
            Some(c) => pairs.push((r, *c)),
            None => missing.push(r.utterance_id() + "/" + r.emotion.as_str()),
        }
    }
    if pairs.is_empty() {
        bail!(
            "no (speaker, sentence, emotion) overlap between {} and {}",
            args.reference.display(),
            args.candidate.display()
        );
    }

    let pool = ctx.thread_pool()?;
    let rows: Vec<Result<MetricRow>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(r, c)| {
                compare(&ref_base, r, &cand_base, c, args.lambda).with_context(|| {
                    format!("cannot evaluate {} ({})", r.utterance_id(), r.emotion)
                })
            })
            .collect()
    });
    let rows: Vec<MetricRow> = rows.into_iter().collect::<Result<_>>()?;

    io::write_atomic(
        &ctx.out_path("metrics.jsonl"),
        io::format_metric_jsonl(&rows)?.as_bytes(),
    )?;
    io::write_atomic(
        &ctx.out_path("metrics_summary.csv"),
        io::format_metric_summary(&rows).as_bytes(),
    )?;
    io::write_atomic(
        &ctx.out_path("metrics_by_emotion.csv"),
        by_emotion_csv(&rows).as_bytes(),
    )?;
    let mut missing_report = String::from("# reference rows without a candidate\n");
    for id in &missing {
        writeln!(missing_report, "{id}").expect("string write");
    }
    io::write_atomic(&ctx.out_path("missing_report.tsv"), missing_report.as_bytes())?;

    println!(
        "evaluated {} pair(s); {} reference row(s) missing a candidate",
        rows.len(),
        missing.len()
    );
    if missing.is_empty() {
        Ok(Outcome::Full)
    } else {
        Ok(Outcome::Partial(format!(
            "{} reference row(s) had no candidate; see missing_report.tsv",
            missing.len()
        )))
    }
}

fn load_tracks(base: &Path, row: &ManifestRow) -> Result<(F0Track, MelCepstraTrack)> {
    let tracks = row
        .tracks
        .as_ref()
        .ok_or_else(|| anyhow!("row {} lacks extracted tracks", row.utterance_id()))?;
    let mel = row
        .mel
        .as_ref()
        .ok_or_else(|| anyhow!("row {} lacks an extracted mel track", row.utterance_id()))?;
    let (f0, _energy) = io::read_scalar_tracks(&resolve(base, tracks))?;
    let mel = match io::read_track_binary(&resolve(base, mel))? {
        TrackData::Mel(m) => m,
        TrackData::F0(_) => bail!("track file holds an f0 track, expected mel cepstra"),
        TrackData::Energy(_) => bail!("track file holds an energy track, expected mel cepstra"),
    };
    Ok((f0, mel))
}

fn compare(
    ref_base: &Path,
    r: &ManifestRow,
    cand_base: &Path,
    c: &ManifestRow,
    lambda: Option<f64>,
) -> Result<MetricRow> {
    let (ref_f0, ref_mel) = load_tracks(ref_base, r)?;
    let (cand_f0, cand_mel) = load_tracks(cand_base, c)?;
    if ref_mel.sample_rate != cand_mel.sample_rate {
        bail!(
            "sample rates differ ({} vs {}); resample offline before evaluating",
            ref_mel.sample_rate,
            cand_mel.sample_rate
        );
    }
    let report = evaluate_pair(&ref_mel, &cand_mel, &ref_f0, &cand_f0)?;
    Ok(MetricRow {
        speaker: r.speaker.clone(),
        sentence: r.sentence.clone(),
        emotion: r.emotion,
        lambda,
        report,
    })
}

/// Per-emotion means over the evaluated rows.
fn by_emotion_csv(rows: &[MetricRow]) -> String {
    let mut acc: BTreeMap<EmotionLabel, (usize, f64, f64, f64)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.emotion).or_default();
        e.0 += 1;
        e.1 += r.report.mcd_db;
        e.2 += r.report.f0_rmse_hz;
        e.3 += r.report.mel_mae;
    }
    let mut out = String::from("emotion,utterances,mean_mcd_db,mean_f0_rmse_hz,mean_mel_mae\n");
    for (emotion, (n, mcd, f0, mae)) in acc {
        let n_f = n as f64;
        writeln!(
            out,
            "{emotion},{n},{},{},{}",
            mcd / n_f,
            f0 / n_f,
            mae / n_f
        )
        .expect("string write");
    }
    out
}
