//! Pitch-contour export for external plotting.

use super::{manifest_dir, read_manifest_rows, resolve, Ctx, Outcome};
use crate::config::config_err;
use crate::PlotArgs;
use anyhow::{bail, Context, Result};
use imix_core::io;
use imix_core::metrics::export_pitch_contour;
use imix_core::signal::F0Track;

/// Two sources: explicit `--track`/`--label` pairs, or a manifest plus
/// `--speaker`/`--sentence` (one contour per emotion of that utterance).
pub fn run(_ctx: &Ctx, args: &PlotArgs) -> Result<Outcome> {
    let mut tracks: Vec<(String, F0Track)> = Vec::new();

    if !args.track.is_empty() {
        if args.track.len() != args.label.len() {
            return config_err(format!(
                "{} --track flag(s) but {} --label flag(s); they pair one-to-one",
                args.track.len(),
                args.label.len()
            ));
        }
        for (path, label) in args.track.iter().zip(&args.label) {
            let (f0, _) = io::read_scalar_tracks(path)
                .with_context(|| format!("cannot read track table {}", path.display()))?;
            tracks.push((label.clone(), f0));
        }
    }

    if let Some(manifest) = &args.manifest {
        let (speaker, sentence) = (
            args.speaker.as_deref().expect("clap requires"),
            args.sentence.as_deref().expect("clap requires"),
        );
        let base = manifest_dir(manifest);
        for row in read_manifest_rows(manifest)? {
            if row.speaker != speaker || row.sentence != sentence {
                continue;
            }
            let Some(trk) = &row.tracks else {
                bail!("row {} has no extracted tracks; run `imix extract`", row.utterance_id());
            };
            let (f0, _) = io::read_scalar_tracks(&resolve(&base, trk))?;
            tracks.push((row.emotion.to_string(), f0));
        }
        if tracks.is_empty() {
            bail!("manifest has no rows for {speaker}/{sentence}");
        }
    }

    if tracks.is_empty() {
        return config_err("nothing to plot: pass --track/--label pairs or --manifest with --speaker and --sentence");
    }
    export_pitch_contour(&tracks, &args.out)?;
    println!("wrote {} contour(s) to {}", tracks.len(), args.out.display());
    Ok(Outcome::Full)
}
