//! Manifest builder for speaker/emotion directory trees.

use super::{Ctx, Outcome};
use crate::config::config_err;
use crate::ManifestArgs;
use anyhow::{bail, Context, Result};
use imix_core::io::ManifestRow;
use imix_core::mixer::EmotionLabel;
use std::path::{Path, PathBuf};

/// Walks `<root>/<speaker>/<emotion>/<sentence>.wav`, pairing each wav
/// with a same-stem `.tsv` alignment. Unknown emotion directories and
/// wavs without alignments are skipped with a warning.
pub fn run(_ctx: &Ctx, args: &ManifestArgs) -> Result<Outcome> {
    if !args.root.is_dir() {
        return config_err(format!("corpus root {} is not a directory", args.root.display()));
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.root.join("manifest.tsv"));
    let out_dir = super::manifest_dir(&out);

    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let walker = walkdir::WalkDir::new(&args.root)
        .min_depth(3)
        .max_depth(3)
        .sort_by_file_name();
    for entry in walker {
        let entry = entry.context("cannot walk corpus root")?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().and_then(|e| e.to_str()) != Some("wav") {
            continue;
        }
        let rel = path.strip_prefix(&args.root).expect("walked under root");
        let mut parts = rel.components();
        let speaker = component_str(parts.next())?;
        let emotion_dir = component_str(parts.next())?;
        let Ok(emotion) = emotion_dir.to_lowercase().parse::<EmotionLabel>() else {
            eprintln!("imix: skipping {}: unknown emotion directory {emotion_dir:?}", path.display());
            skipped += 1;
            continue;
        };
        let sentence = path
            .file_stem()
            .and_then(|s| s.to_str())
            .context("non-UTF-8 file name")?
            .to_string();
        let alignment = path.with_extension("tsv");
        if !alignment.is_file() {
            eprintln!(
                "imix: skipping {}: no alignment file {}",
                path.display(),
                alignment.display()
            );
            skipped += 1;
            continue;
        }
        rows.push(ManifestRow {
            speaker: speaker.to_string(),
            sentence,
            emotion,
            audio: relative_to(path, &out_dir),
            alignment: relative_to(&alignment, &out_dir),
            features: None,
            tracks: None,
            mel: None,
        });
    }
    if rows.is_empty() {
        bail!(
            "no usable (wav, alignment) pairs under {} — expected <speaker>/<emotion>/<sentence>.wav",
            args.root.display()
        );
    }
    rows.sort_by(|a, b| {
        (&a.speaker, &a.sentence, a.emotion).cmp(&(&b.speaker, &b.sentence, b.emotion))
    });
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    imix_core::io::write_manifest(&rows, &out)?;
    println!(
        "wrote {} rows to {} ({} skipped)",
        rows.len(),
        out.display(),
        skipped
    );
    Ok(Outcome::Full)
}

fn component_str(c: Option<std::path::Component<'_>>) -> Result<&str> {
    c.and_then(|c| c.as_os_str().to_str())
        .context("non-UTF-8 path component")
}

/// Expresses `path` relative to `base` when it sits underneath it;
/// otherwise keeps the path as given.
fn relative_to(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| path.to_path_buf())
}
