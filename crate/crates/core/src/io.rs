//! On-disk formats: corpus manifests, phoneme-feature and frame-track
//! tables, the IMX1 binary track container, pseudo-label datasets, the
//! IMXC training checkpoint, and the loss/metric CSV layouts.
//!
//! Text formats are UTF-8, line-delimited, tab-separated, with
//! '#'-prefixed comment lines; floats print in Rust's shortest
//! round-trip form. All writes go through a temp-file-plus-rename so
//! interrupted runs never leave partial files.

use crate::adaptor::{
    assign_disc, assign_params, flatten_disc, flatten_params, AdaptorConfig, AdaptorParams,
    DiscriminatorParams, LossReport, Mlp, DISC_WINDOW, N_EMOTIONS,
};
use crate::align::PhonemeFeatures;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::mixer::{EmotionLabel, PseudoLabel, SkipReport};
use crate::signal::{EnergyTrack, F0Track, MelCepstraTrack};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename), creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Data lines of a tab-separated file: comments and blanks skipped,
/// carriage returns stripped, 1-based line numbers preserved.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l).trim_end_matches([' '])))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_field<T: FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("cannot parse {what} from {field:?}"),
    })
}

fn check_id(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n', '\r', ',']) || value.starts_with('#') {
        return Err(Error::Format {
            path: PathBuf::new(),
            detail: format!("{what} {value:?} must be non-empty without tabs, commas, or '#' prefix"),
        });
    }
    Ok(())
}

// -------------------------------------------------------------------------
// Corpus manifest
// -------------------------------------------------------------------------

/// One utterance in a corpus manifest. Paths are stored as written
/// (conventionally relative to the manifest's directory); the three
/// feature paths are absent until `extract` has run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub speaker: String,
    pub sentence: String,
    pub emotion: EmotionLabel,
    pub audio: PathBuf,
    pub alignment: PathBuf,
    pub features: Option<PathBuf>,
    pub tracks: Option<PathBuf>,
    pub mel: Option<PathBuf>,
}

impl ManifestRow {
    pub fn utterance_id(&self) -> String {
        format!("{}/{}", self.speaker, self.sentence)
    }
}

fn opt_path(field: &str) -> Option<PathBuf> {
    if field == "-" || field.is_empty() {
        None
    } else {
        Some(PathBuf::from(field))
    }
}

fn path_field(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

/// Parses manifest text: one row per line,
/// `speaker<TAB>sentence<TAB>emotion<TAB>audio<TAB>alignment` plus three
/// optional feature-path columns ('-' marks an absent path).
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for (line, l) in data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 5 && f.len() != 8 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 5 or 8 tab-separated fields, found {}", f.len()),
            });
        }
        let emotion: EmotionLabel = parse_field(line, f[2], "emotion")?;
        rows.push(ManifestRow {
            speaker: f[0].to_string(),
            sentence: f[1].to_string(),
            emotion,
            audio: PathBuf::from(f[3]),
            alignment: PathBuf::from(f[4]),
            features: f.get(5).and_then(|s| opt_path(s)),
            tracks: f.get(6).and_then(|s| opt_path(s)),
            mel: f.get(7).and_then(|s| opt_path(s)),
        });
    }
    if rows.is_empty() {
        return Err(Error::Format {
            path: PathBuf::new(),
            detail: "manifest contains no rows".into(),
        });
    }
    Ok(rows)
}

pub fn format_manifest(rows: &[ManifestRow]) -> Result<String> {
    let mut out = String::from("# speaker\tsentence\temotion\taudio\talignment\tfeatures\ttracks\tmel\n");
    for r in rows {
        check_id(&r.speaker, "speaker")?;
        check_id(&r.sentence, "sentence")?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.speaker,
            r.sentence,
            r.emotion,
            r.audio.display(),
            r.alignment.display(),
            path_field(&r.features),
            path_field(&r.tracks),
            path_field(&r.mel),
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    parse_manifest(&read_text(path)?)
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    write_atomic(path, format_manifest(rows)?.as_bytes())
}

// -------------------------------------------------------------------------
// Phoneme features
// -------------------------------------------------------------------------

/// `phoneme<TAB>pitch<TAB>duration<TAB>energy`, one phoneme per line.
pub fn format_phoneme_features(f: &PhonemeFeatures) -> String {
    let mut out = String::from("# phoneme\tpitch\tduration\tenergy\n");
    for i in 0..f.len() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            f.phonemes[i], f.pitch[i], f.duration[i], f.energy[i]
        )
        .expect("string write");
    }
    out
}

pub fn parse_phoneme_features(text: &str) -> Result<PhonemeFeatures> {
    let (mut phonemes, mut pitch, mut duration, mut energy) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, l) in data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 4 tab-separated fields, found {}", f.len()),
            });
        }
        phonemes.push(f[0].to_string());
        pitch.push(parse_field(line, f[1], "pitch")?);
        duration.push(parse_field(line, f[2], "duration")?);
        energy.push(parse_field(line, f[3], "energy")?);
    }
    PhonemeFeatures::new(phonemes, pitch, duration, energy)
}

pub fn read_phoneme_features(path: &Path) -> Result<PhonemeFeatures> {
    parse_phoneme_features(&read_text(path)?)
}

pub fn write_phoneme_features(f: &PhonemeFeatures, path: &Path) -> Result<()> {
    write_atomic(path, format_phoneme_features(f).as_bytes())
}

// -------------------------------------------------------------------------
// Frame-synchronous scalar tracks (columnar text)
// -------------------------------------------------------------------------

/// One frame per line: `index<TAB>f0<TAB>voiced<TAB>energy`, preceded by
/// `# sample_rate N` and `# hop_length N` metadata comments.
pub fn format_scalar_tracks(f0: &F0Track, energy: &EnergyTrack) -> Result<String> {
    if f0.len() != energy.len()
        || f0.hop_length != energy.hop_length
        || f0.sample_rate != energy.sample_rate
    {
        return Err(Error::TrackMismatch(format!(
            "f0 ({} frames, hop {}, {} Hz) and energy ({} frames, hop {}, {} Hz) disagree",
            f0.len(),
            f0.hop_length,
            f0.sample_rate,
            energy.len(),
            energy.hop_length,
            energy.sample_rate
        )));
    }
    let mut out = format!(
        "# sample_rate {}\n# hop_length {}\n# index\tf0\tvoiced\tenergy\n",
        f0.sample_rate, f0.hop_length
    );
    for i in 0..f0.len() {
        writeln!(
            out,
            "{i}\t{}\t{}\t{}",
            f0.values[i],
            u8::from(f0.voiced[i]),
            energy.values[i]
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn parse_scalar_tracks(text: &str) -> Result<(F0Track, EnergyTrack)> {
    let mut sample_rate: Option<u32> = None;
    let mut hop_length: Option<usize> = None;
    for (line, l) in text.lines().enumerate() {
        let l = l.trim();
        if let Some(rest) = l.strip_prefix("# sample_rate") {
            sample_rate = Some(parse_field(line + 1, rest.trim(), "sample_rate")?);
        } else if let Some(rest) = l.strip_prefix("# hop_length") {
            hop_length = Some(parse_field(line + 1, rest.trim(), "hop_length")?);
        }
    }
    let (Some(sample_rate), Some(hop_length)) = (sample_rate, hop_length) else {
        return Err(Error::Format {
            path: PathBuf::new(),
            detail: "track table lacks sample_rate / hop_length metadata".into(),
        });
    };

    let (mut values, mut voiced, mut energies) = (Vec::new(), Vec::new(), Vec::new());
    for (line, l) in data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 4 tab-separated fields, found {}", f.len()),
            });
        }
        let index: usize = parse_field(line, f[0], "frame index")?;
        if index != values.len() {
            return Err(Error::Parse {
                line,
                detail: format!("frame index {index} out of order (expected {})", values.len()),
            });
        }
        values.push(parse_field(line, f[1], "f0")?);
        let flag: u8 = parse_field(line, f[2], "voiced flag")?;
        voiced.push(match flag {
            0 => false,
            1 => true,
            _ => {
                return Err(Error::Parse {
                    line,
                    detail: format!("voiced flag must be 0 or 1, found {flag}"),
                })
            }
        });
        energies.push(parse_field(line, f[3], "energy")?);
    }
    let f0 = F0Track::new(values, voiced, hop_length, sample_rate)?;
    let energy = EnergyTrack {
        values: energies,
        hop_length,
        sample_rate,
    };
    Ok((f0, energy))
}

pub fn read_scalar_tracks(path: &Path) -> Result<(F0Track, EnergyTrack)> {
    parse_scalar_tracks(&read_text(path)?)
}

pub fn write_scalar_tracks(f0: &F0Track, energy: &EnergyTrack, path: &Path) -> Result<()> {
    write_atomic(path, format_scalar_tracks(f0, energy)?.as_bytes())
}

// -------------------------------------------------------------------------
// IMX1 binary track container
// -------------------------------------------------------------------------

/// Any frame-synchronous track, for the binary container.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackData {
    F0(F0Track),
    Energy(EnergyTrack),
    Mel(MelCepstraTrack),
}

const TRACK_MAGIC: &[u8; 4] = b"IMX1";
const TRACK_VERSION: u8 = 1;

/// 16-byte header: magic "IMX1", version, track type (0 f0 / 1 energy /
/// 2 mel), frame width u16 LE, frame count u32 LE, four reserved zero
/// bytes; then sample_rate u32 LE and hop_length u32 LE, then the payload
/// as f64 LE frame-major. F0 tracks append one voiced byte per frame.
pub fn encode_track(track: &TrackData) -> Vec<u8> {
    let (type_id, width, count, sample_rate, hop): (u8, u16, u32, u32, u32) = match track {
        TrackData::F0(t) => (0, 1, t.len() as u32, t.sample_rate, t.hop_length as u32),
        TrackData::Energy(t) => (1, 1, t.len() as u32, t.sample_rate, t.hop_length as u32),
        TrackData::Mel(t) => (
            2,
            t.n_cepstra() as u16,
            t.len() as u32,
            t.sample_rate,
            t.hop_length as u32,
        ),
    };
    let mut out = Vec::new();
    out.extend_from_slice(TRACK_MAGIC);
    out.push(TRACK_VERSION);
    out.push(type_id);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&hop.to_le_bytes());
    match track {
        TrackData::F0(t) => {
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend(t.voiced.iter().map(|&b| u8::from(b)));
        }
        TrackData::Energy(t) => {
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        TrackData::Mel(t) => {
            for frame in &t.frames {
                for v in frame {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::format(self.path, "truncated track container"));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_track(bytes: &[u8], path: &Path) -> Result<TrackData> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(4)? != TRACK_MAGIC {
        return Err(Error::format(path, "bad magic (expected IMX1)"));
    }
    let version = c.take(1)?[0];
    if version != TRACK_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let type_id = c.take(1)?[0];
    let width = c.u16()? as usize;
    let count = c.u32()? as usize;
    c.take(4)?; // reserved
    let sample_rate = c.u32()?;
    let hop_length = c.u32()? as usize;

    let track = match type_id {
        0 => {
            if width != 1 {
                return Err(Error::format(path, format!("f0 width {width} != 1")));
            }
            let values = c.f64s(count)?;
            let voiced: Vec<bool> = c
                .take(count)?
                .iter()
                .map(|&b| b != 0)
                .collect();
            TrackData::F0(F0Track::new(values, voiced, hop_length, sample_rate)?)
        }
        1 => {
            if width != 1 {
                return Err(Error::format(path, format!("energy width {width} != 1")));
            }
            TrackData::Energy(EnergyTrack {
                values: c.f64s(count)?,
                hop_length,
                sample_rate,
            })
        }
        2 => {
            let mut frames = Vec::with_capacity(count);
            for _ in 0..count {
                frames.push(c.f64s(width)?);
            }
            TrackData::Mel(MelCepstraTrack {
                frames,
                hop_length,
                sample_rate,
            })
        }
        other => return Err(Error::format(path, format!("unknown track type {other}"))),
    };
    if c.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after track payload"));
    }
    Ok(track)
}

pub fn read_track_binary(path: &Path) -> Result<TrackData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_track(&bytes, path)
}

pub fn write_track_binary(track: &TrackData, path: &Path) -> Result<()> {
    write_atomic(path, &encode_track(track))
}

// -------------------------------------------------------------------------
// Pseudo-label dataset + skip report
// -------------------------------------------------------------------------

fn join_seq<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn split_seq<T: FromStr>(line: usize, field: &str, what: &str) -> Result<Vec<T>> {
    field
        .split(',')
        .map(|p| parse_field(line, p, what))
        .collect()
}

/// One record per line: speaker, sentence, emo_i, emo_j, lambda, then the
/// pitch, duration, and energy sequences as comma-joined columns. Lambda
/// weights emo_i (the first emotion column).
pub fn format_pseudo_labels(labels: &[PseudoLabel]) -> Result<String> {
    let mut out =
        String::from("# speaker\tsentence\temo_i\temo_j\tlambda\tpitch\tduration\tenergy\n");
    for l in labels {
        check_id(&l.speaker, "speaker")?;
        check_id(&l.sentence, "sentence")?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.speaker,
            l.sentence,
            l.emo_i,
            l.emo_j,
            l.lambda,
            join_seq(&l.pitch),
            join_seq(&l.duration),
            join_seq(&l.energy),
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn parse_pseudo_labels(text: &str) -> Result<Vec<PseudoLabel>> {
    let mut labels = Vec::new();
    for (line, l) in data_lines(text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 8 tab-separated fields, found {}", f.len()),
            });
        }
        let mixed = crate::mixer::MixedFeatures {
            pitch: split_seq(line, f[5], "pitch")?,
            duration: split_seq(line, f[6], "duration")?,
            energy: split_seq(line, f[7], "energy")?,
        };
        let label = PseudoLabel::new(
            f[0].to_string(),
            f[1].to_string(),
            parse_field(line, f[2], "emo_i")?,
            parse_field(line, f[3], "emo_j")?,
            parse_field(line, f[4], "lambda")?,
            mixed,
        )?;
        labels.push(label);
    }
    Ok(labels)
}

pub fn read_pseudo_labels(path: &Path) -> Result<Vec<PseudoLabel>> {
    parse_pseudo_labels(&read_text(path)?)
}

pub fn write_pseudo_labels(labels: &[PseudoLabel], path: &Path) -> Result<()> {
    write_atomic(path, format_pseudo_labels(labels)?.as_bytes())
}

/// `speaker<TAB>sentence<TAB>emotion<TAB>detail`, one skipped pair per line.
pub fn format_skip_report(report: &SkipReport) -> String {
    let mut out = String::from("# speaker\tsentence\temotion\tdetail\n");
    for e in &report.entries {
        let detail = e.detail.replace(['\t', '\n', '\r'], " ");
        writeln!(out, "{}\t{}\t{}\t{}", e.speaker, e.sentence, e.emotion, detail)
            .expect("string write");
    }
    out
}

pub fn write_skip_report(report: &SkipReport, path: &Path) -> Result<()> {
    write_atomic(path, format_skip_report(report).as_bytes())
}

// -------------------------------------------------------------------------
// IMXC training checkpoint
// -------------------------------------------------------------------------

/// A full training snapshot: configuration, vocabularies, step counter,
/// and every parameter of the adaptor and its discriminators.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: AdaptorConfig,
    pub phonemes: Vec<String>,
    pub speakers: Vec<String>,
    pub step: u64,
    pub use_discriminator: bool,
    pub params: AdaptorParams,
    pub disc: DiscriminatorParams,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: AdaptorConfig,
    phonemes: Vec<String>,
    speakers: Vec<String>,
    step: u64,
    use_discriminator: bool,
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"IMXC";
const CHECKPOINT_VERSION: u8 = 1;

/// Magic "IMXC", version byte, three reserved zero bytes, then a
/// length-prefixed JSON metadata blob (config, vocabularies, step), then
/// the generator and discriminator parameter vectors, each as a u64 LE
/// count followed by f64 LE values in the canonical flattening order.
pub fn encode_checkpoint(cp: &Checkpoint) -> Result<Vec<u8>> {
    if cp.config.phoneme_vocab != cp.phonemes.len() || cp.config.speakers != cp.speakers.len() {
        return Err(Error::Adaptor(format!(
            "checkpoint config sizes ({}, {}) disagree with vocabularies ({}, {})",
            cp.config.phoneme_vocab,
            cp.config.speakers,
            cp.phonemes.len(),
            cp.speakers.len()
        )));
    }
    let meta = CheckpointMeta {
        config: cp.config.clone(),
        phonemes: cp.phonemes.clone(),
        speakers: cp.speakers.clone(),
        step: cp.step,
        use_discriminator: cp.use_discriminator,
    };
    let json = serde_json::to_vec(&meta)
        .map_err(|e| Error::Adaptor(format!("cannot serialize checkpoint metadata: {e}")))?;

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&[0u8; 3]);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for vec in [flatten_params(&cp.params), flatten_disc(&cp.disc)] {
        out.extend_from_slice(&(vec.len() as u64).to_le_bytes());
        for v in vec {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Zero-valued parameters with the shapes `cfg` implies.
fn empty_params(cfg: &AdaptorConfig) -> (AdaptorParams, DiscriminatorParams) {
    let table = |rows: usize| vec![vec![0.0; cfg.embedding_dim]; rows];
    let params = AdaptorParams {
        phoneme_table: table(cfg.phoneme_vocab),
        speaker_table: table(cfg.speakers),
        emotion_table: table(N_EMOTIONS),
        duration_head: Mlp::zeros(cfg.hidden_dim, cfg.input_dim()),
        pitch_head: Mlp::zeros(cfg.hidden_dim, cfg.input_dim()),
        energy_head: Mlp::zeros(cfg.hidden_dim, cfg.input_dim()),
    };
    let disc = DiscriminatorParams {
        duration: Mlp::zeros(cfg.hidden_dim, DISC_WINDOW),
        pitch: Mlp::zeros(cfg.hidden_dim, DISC_WINDOW),
        energy: Mlp::zeros(cfg.hidden_dim, DISC_WINDOW),
    };
    (params, disc)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "bad magic (expected IMXC)"));
    }
    let version = c.take(1)?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    c.take(3)?; // reserved
    let json_len = u64::from_le_bytes(c.take(8)?.try_into().unwrap()) as usize;
    let meta: CheckpointMeta = serde_json::from_slice(c.take(json_len)?)
        .map_err(|e| Error::format(path, format!("bad checkpoint metadata: {e}")))?;
    meta.config.validate()?;
    if meta.config.phoneme_vocab != meta.phonemes.len()
        || meta.config.speakers != meta.speakers.len()
    {
        return Err(Error::format(path, "config sizes disagree with vocabularies"));
    }

    let (mut params, mut disc) = empty_params(&meta.config);
    let gen_len = u64::from_le_bytes(c.take(8)?.try_into().unwrap()) as usize;
    let gen = c.f64s(gen_len)?;
    assign_params(&mut params, &gen)
        .map_err(|_| Error::format(path, "generator parameter count mismatch"))?;
    let disc_len = u64::from_le_bytes(c.take(8)?.try_into().unwrap()) as usize;
    let dvals = c.f64s(disc_len)?;
    assign_disc(&mut disc, &dvals)
        .map_err(|_| Error::format(path, "discriminator parameter count mismatch"))?;
    if c.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after checkpoint payload"));
    }
    if !params.is_finite() || !disc.is_finite() {
        return Err(Error::format(path, "checkpoint holds non-finite parameters"));
    }
    Ok(Checkpoint {
        config: meta.config,
        phonemes: meta.phonemes,
        speakers: meta.speakers,
        step: meta.step,
        use_discriminator: meta.use_discriminator,
        params,
        disc,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

pub fn write_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(cp)?)
}

// -------------------------------------------------------------------------
// Loss trajectory CSV
// -------------------------------------------------------------------------

/// CSV of one report per step. Adversarial columns appear only when the
/// run trained with discriminators; mixing reports with and without
/// adversarial terms is an error.
pub fn format_loss_csv(reports: &[(u64, LossReport)]) -> Result<String> {
    let with_adv = reports
        .first()
        .is_some_and(|(_, r)| r.l_adv_d.is_some());
    let mut out = String::from("step,l_d,l_p,l_e,l_d_tilde,l_p_tilde,l_e_tilde");
    if with_adv {
        out.push_str(",l_adv_d,l_adv_p,l_adv_e");
    }
    out.push_str(",l_categorical,l_intermediate,l_total\n");
    for (step, r) in reports {
        if r.l_adv_d.is_some() != with_adv {
            return Err(Error::Adaptor(
                "loss reports mix adversarial and non-adversarial steps".into(),
            ));
        }
        write!(
            out,
            "{step},{},{},{},{},{},{}",
            r.l_d, r.l_p, r.l_e, r.l_d_tilde, r.l_p_tilde, r.l_e_tilde
        )
        .expect("string write");
        if with_adv {
            write!(
                out,
                ",{},{},{}",
                r.l_adv_d.unwrap(),
                r.l_adv_p.unwrap(),
                r.l_adv_e.unwrap()
            )
            .expect("string write");
        }
        writeln!(out, ",{},{},{}", r.l_categorical, r.l_intermediate, r.l_total)
            .expect("string write");
    }
    Ok(out)
}

pub fn write_loss_csv(reports: &[(u64, LossReport)], path: &Path) -> Result<()> {
    write_atomic(path, format_loss_csv(reports)?.as_bytes())
}

// -------------------------------------------------------------------------
// Metric rows (JSONL + summary CSV)
// -------------------------------------------------------------------------

/// One evaluated utterance pair; `lambda` is the conditioning intensity
/// when the candidate came from an intermediate-intensity run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub speaker: String,
    pub sentence: String,
    pub emotion: EmotionLabel,
    pub lambda: Option<f64>,
    #[serde(flatten)]
    pub report: MetricReport,
}

impl MetricRow {
    pub fn utterance_id(&self) -> String {
        format!("{}/{}", self.speaker, self.sentence)
    }
}

/// One JSON object per line, in input order.
pub fn format_metric_jsonl(rows: &[MetricRow]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::Metric(format!("cannot serialize metric row: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_metric_jsonl(text: &str) -> Result<Vec<MetricRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Metric(format!("bad metric row: {e}")))
        })
        .collect()
}

/// `utterance,emotion,lambda,mcd_db,f0_rmse_hz,mel_mae`; lambda is empty
/// for reference-emotion comparisons.
pub fn format_metric_summary(rows: &[MetricRow]) -> String {
    let mut out = String::from("utterance,emotion,lambda,mcd_db,f0_rmse_hz,mel_mae\n");
    for r in rows {
        let lambda = r.lambda.map_or_else(String::new, |l| l.to_string());
        writeln!(
            out,
            "{},{},{lambda},{},{},{}",
            r.utterance_id(),
            r.emotion,
            r.report.mcd_db,
            r.report.f0_rmse_hz,
            r.report.mel_mae
        )
        .expect("string write");
    }
    out
}
