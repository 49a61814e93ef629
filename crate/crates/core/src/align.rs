//! Phoneme alignments and reduction of frame tracks to phoneme-level
//! averaged pitch/duration/energy.
//!
//! Frame indices come from rounding boundary times at the frame rate
//! (sample_rate / hop_length), end-exclusive, so adjacent phonemes
//! partition the frame axis and durations telescope.

use crate::error::{Error, Result};
use crate::signal::{AnalysisConfig, EnergyTrack, F0Track};

/// One aligned phoneme interval in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEntry {
    pub phoneme: String,
    pub start: f64,
    pub end: f64,
}

/// Ordered, non-overlapping phoneme intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeAlignment {
    entries: Vec<AlignmentEntry>,
}

impl PhonemeAlignment {
    pub fn new(entries: Vec<AlignmentEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidAlignment("no entries".into()));
        }
        let mut prev_end = 0.0f64;
        for (i, e) in entries.iter().enumerate() {
            if e.phoneme.is_empty() || e.phoneme.chars().any(char::is_whitespace) {
                return Err(Error::InvalidAlignment(format!(
                    "entry {i}: bad phoneme symbol {:?}",
                    e.phoneme
                )));
            }
            if !(e.start.is_finite() && e.end.is_finite()) || e.start < 0.0 {
                return Err(Error::InvalidAlignment(format!(
                    "entry {i}: non-finite or negative times ({}, {})",
                    e.start, e.end
                )));
            }
            if e.start >= e.end {
                return Err(Error::InvalidAlignment(format!(
                    "entry {i} ({}): start {} >= end {}",
                    e.phoneme, e.start, e.end
                )));
            }
            if i > 0 && e.start < prev_end {
                return Err(Error::InvalidAlignment(format!(
                    "entry {i} ({}) starts at {} before previous end {}",
                    e.phoneme, e.start, prev_end
                )));
            }
            prev_end = e.end;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[AlignmentEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phonemes(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.phoneme.clone()).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.end)
    }

    /// Serializes back to the TSV interchange form; floats use the shortest
    /// representation that round-trips, so parse(to_tsv(a)) == a.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.phoneme, e.start, e.end));
        }
        out
    }
}

/// Parses the alignment TSV: `phoneme<TAB>start_seconds<TAB>end_seconds`
/// per line, '#' comments and blank lines ignored.
pub fn parse_alignment(text: &str) -> Result<PhonemeAlignment> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (symbol, start, end) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(a), Some(b), None) => (s, a, b),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: format!("expected 3 tab-separated fields, got {line:?}"),
                })
            }
        };
        let parse_time = |v: &str| -> Result<f64> {
            v.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                detail: format!("bad time {v:?}: {e}"),
            })
        };
        entries.push(AlignmentEntry {
            phoneme: symbol.trim().to_string(),
            start: parse_time(start)?,
            end: parse_time(end)?,
        });
    }
    PhonemeAlignment::new(entries)
}

/// Phoneme-level averaged features: one (pitch, duration, energy) triple
/// per phoneme symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeFeatures {
    pub phonemes: Vec<String>,
    pub pitch: Vec<f64>,
    pub duration: Vec<u32>,
    pub energy: Vec<f64>,
}

impl PhonemeFeatures {
    pub fn new(
        phonemes: Vec<String>,
        pitch: Vec<f64>,
        duration: Vec<u32>,
        energy: Vec<f64>,
    ) -> Result<Self> {
        let n = phonemes.len();
        if n == 0 {
            return Err(Error::InvalidFeatures("empty phoneme sequence".into()));
        }
        if pitch.len() != n || duration.len() != n || energy.len() != n {
            return Err(Error::InvalidFeatures(format!(
                "length mismatch: {} phonemes, {} pitch, {} duration, {} energy",
                n,
                pitch.len(),
                duration.len(),
                energy.len()
            )));
        }
        for (i, (&p, &e)) in pitch.iter().zip(&energy).enumerate() {
            if !(p.is_finite() && p >= 0.0 && e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidFeatures(format!(
                    "phoneme {i}: pitch {p} / energy {e} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            phonemes,
            pitch,
            duration,
            energy,
        })
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }
}

/// duration[i] = round(end_i * fr) - round(start_i * fr) at frame rate
/// fr = sample_rate / hop_length. Adjacent entries therefore partition
/// frames and durations sum telescopically.
pub fn durations_in_frames(
    a: &PhonemeAlignment,
    cfg: &AnalysisConfig,
    sample_rate: u32,
) -> Vec<u32> {
    let fr = cfg.frame_rate(sample_rate);
    a.entries()
        .iter()
        .map(|e| {
            let lo = (e.start * fr).round() as i64;
            let hi = (e.end * fr).round() as i64;
            (hi - lo).max(0) as u32
        })
        .collect()
}

/// Fills unvoiced gaps in an F0 track by linear interpolation between the
/// surrounding voiced frames; leading/trailing gaps copy the nearest voiced
/// value. A track with no voiced frame at all stays all-zero.
pub fn interpolate_unvoiced(f0: &F0Track) -> Vec<f64> {
    let n = f0.values.len();
    let voiced_idx: Vec<usize> = (0..n).filter(|&i| f0.voiced[i]).collect();
    if voiced_idx.is_empty() {
        return vec![0.0; n];
    }

    let mut out = vec![0.0; n];
    let first = voiced_idx[0];
    let last = *voiced_idx.last().unwrap();
    for i in 0..n {
        out[i] = if i <= first {
            f0.values[first]
        } else if i >= last {
            f0.values[last]
        } else if f0.voiced[i] {
            f0.values[i]
        } else {
            // Between two voiced anchors; find them by scanning outward.
            let left = (0..i).rev().find(|&j| f0.voiced[j]).unwrap();
            let right = (i + 1..n).find(|&j| f0.voiced[j]).unwrap();
            let t = (i - left) as f64 / (right - left) as f64;
            f0.values[left] + t * (f0.values[right] - f0.values[left])
        };
    }
    out
}

/// Reduces frame-level F0/energy tracks to phoneme-level means. Pitch is
/// interpolated to a continuous contour first; frame windows are
/// round(start*fr)..round(end*fr), end-exclusive, clamped to the track.
pub fn phoneme_average(
    f0: &F0Track,
    en: &EnergyTrack,
    a: &PhonemeAlignment,
    cfg: &AnalysisConfig,
) -> Result<PhonemeFeatures> {
    if f0.hop_length != en.hop_length || f0.sample_rate != en.sample_rate {
        return Err(Error::TrackMismatch(format!(
            "f0 (hop {}, {} Hz) vs energy (hop {}, {} Hz)",
            f0.hop_length, f0.sample_rate, en.hop_length, en.sample_rate
        )));
    }
    if f0.hop_length != cfg.hop_length {
        return Err(Error::TrackMismatch(format!(
            "tracks use hop {}, config expects {}",
            f0.hop_length, cfg.hop_length
        )));
    }
    if f0.len() != en.len() {
        return Err(Error::TrackMismatch(format!(
            "f0 has {} frames, energy has {}",
            f0.len(),
            en.len()
        )));
    }
    let n = f0.len();
    if n == 0 {
        return Err(Error::TrackMismatch("empty tracks".into()));
    }

    let sr = f0.sample_rate as f64;
    // Time covered by the frames themselves, plus one hop of slack for
    // aligner boundaries that run marginally past the last frame.
    let covered = ((n - 1) * cfg.hop_length + cfg.frame_length + cfg.hop_length) as f64 / sr;
    if a.end_time() > covered {
        return Err(Error::InvalidAlignment(format!(
            "alignment ends at {:.4} s but tracks cover only {:.4} s",
            a.end_time(),
            covered
        )));
    }

    let fr = cfg.frame_rate(f0.sample_rate);
    let contour = interpolate_unvoiced(f0);
    let duration = durations_in_frames(a, cfg, f0.sample_rate);

    let mut pitch = Vec::with_capacity(a.len());
    let mut energy = Vec::with_capacity(a.len());
    for e in a.entries() {
        let lo = ((e.start * fr).round() as i64).clamp(0, n as i64) as usize;
        let hi = ((e.end * fr).round() as i64).clamp(0, n as i64) as usize;
        if hi > lo {
            let span = (hi - lo) as f64;
            pitch.push(contour[lo..hi].iter().sum::<f64>() / span);
            energy.push(en.values[lo..hi].iter().sum::<f64>() / span);
        } else {
            pitch.push(0.0);
            energy.push(0.0);
        }
    }
    PhonemeFeatures::new(a.phonemes(), pitch, duration, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    fn f0_track(values: Vec<f64>) -> F0Track {
        let voiced = values.iter().map(|&v| v != 0.0).collect();
        F0Track::new(values, voiced, 256, 22050).unwrap()
    }

    fn energy_track(values: Vec<f64>) -> EnergyTrack {
        EnergyTrack {
            values,
            hop_length: 256,
            sample_rate: 22050,
        }
    }

    #[test]
    fn parses_two_entry_document() {
        let a = parse_alignment("AH\t0.00\t0.10\nT\t0.10\t0.25").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.entries()[0].phoneme, "AH");
        assert!((a.entries()[0].end - a.entries()[0].start - 0.10).abs() < 1e-12);
        assert!((a.entries()[1].end - a.entries()[1].start - 0.15).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(matches!(
            parse_alignment("AH\t0.20\t0.10"),
            Err(Error::InvalidAlignment(_))
        ));
    }

    #[test]
    fn rejects_overlap_and_disorder() {
        assert!(parse_alignment("A\t0.0\t0.2\nB\t0.1\t0.3").is_err());
        assert!(parse_alignment("B\t0.2\t0.3\nA\t0.0\t0.1").is_err());
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let text = "# aligner: toy\n\nAH\t0.0\t0.1\n# midway note\nT\t0.1\t0.2\n";
        assert_eq!(parse_alignment(text).unwrap().len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_alignment("AH\t0.0\t0.1\nbroken line\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_document_is_an_error() {
        assert!(parse_alignment("# only comments\n").is_err());
    }

    #[test]
    fn tenth_of_a_second_is_nine_frames() {
        // 0.1 * 22050 / 256 = 8.613..., rounds to 9.
        let a = parse_alignment("AH\t0.0\t0.1").unwrap();
        assert_eq!(durations_in_frames(&a, &cfg(), 22050), vec![9]);
    }

    #[test]
    fn sub_frame_interval_rounds_to_zero() {
        let a = parse_alignment("P\t0.000\t0.004").unwrap();
        assert_eq!(durations_in_frames(&a, &cfg(), 22050), vec![0]);
    }

    #[test]
    fn constant_tracks_average_to_the_constant() {
        let f0 = f0_track(vec![200.0; 40]);
        let en = energy_track(vec![1.0; 40]);
        let a = parse_alignment("A\t0.0\t0.15\nB\t0.15\t0.31\nC\t0.31\t0.42").unwrap();
        let feats = phoneme_average(&f0, &en, &a, &cfg()).unwrap();
        assert_eq!(feats.len(), 3);
        for i in 0..3 {
            assert!((feats.pitch[i] - 200.0).abs() < 1e-12);
            assert!((feats.energy[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unvoiced_gap_interpolates_to_midpoint() {
        // Frames (100, 0, 300): middle is unvoiced, interpolates to 200,
        // so the single covering phoneme averages to 200.
        let f0 = f0_track(vec![100.0, 0.0, 300.0]);
        let en = energy_track(vec![1.0, 1.0, 1.0]);
        assert_eq!(interpolate_unvoiced(&f0), vec![100.0, 200.0, 300.0]);

        // round(end * fr) = 3 for end = 0.0349 at fr = 86.13.
        let a = parse_alignment("A\t0.0\t0.0349").unwrap();
        let feats = phoneme_average(&f0, &en, &a, &cfg()).unwrap();
        assert_eq!(feats.duration, vec![3]);
        assert!((feats.pitch[0] - 200.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_phonemes_average_disjoint_frames() {
        // Frames [0..1] and [2..3] with energies (1,1,3,3) → (1, 3).
        // fr = 86.13: boundaries 0, 2, 4 frames → times 0, 0.02322, 0.04645.
        let f0 = f0_track(vec![150.0; 4]);
        let en = energy_track(vec![1.0, 1.0, 3.0, 3.0]);
        let a = parse_alignment("A\t0.0\t0.02322\nB\t0.02322\t0.04645").unwrap();
        let feats = phoneme_average(&f0, &en, &a, &cfg()).unwrap();
        assert_eq!(feats.duration, vec![2, 2]);
        assert!((feats.energy[0] - 1.0).abs() < 1e-12);
        assert!((feats.energy[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn edge_gaps_copy_nearest_voiced_value() {
        let f0 = f0_track(vec![0.0, 0.0, 220.0, 0.0, 180.0, 0.0]);
        let got = interpolate_unvoiced(&f0);
        assert_eq!(got, vec![220.0, 220.0, 220.0, 200.0, 180.0, 180.0]);
    }

    #[test]
    fn all_unvoiced_track_stays_zero() {
        let f0 = f0_track(vec![0.0; 5]);
        assert_eq!(interpolate_unvoiced(&f0), vec![0.0; 5]);
        let en = energy_track(vec![0.5; 5]);
        let a = parse_alignment("A\t0.0\t0.05").unwrap();
        let feats = phoneme_average(&f0, &en, &a, &cfg()).unwrap();
        assert_eq!(feats.pitch, vec![0.0]);
    }

    #[test]
    fn hop_mismatch_is_rejected() {
        let f0 = f0_track(vec![200.0; 10]);
        let en = EnergyTrack {
            values: vec![1.0; 10],
            hop_length: 128,
            sample_rate: 22050,
        };
        let a = parse_alignment("A\t0.0\t0.1").unwrap();
        assert!(matches!(
            phoneme_average(&f0, &en, &a, &cfg()),
            Err(Error::TrackMismatch(_))
        ));
    }

    #[test]
    fn alignment_past_track_is_rejected() {
        let f0 = f0_track(vec![200.0; 4]);
        let en = energy_track(vec![1.0; 4]);
        // 4 frames cover (3*256 + 1024)/22050 = 0.0813 s; one hop of slack
        // brings the limit to 0.0929 s.
        let ok = parse_alignment("A\t0.0\t0.092").unwrap();
        assert!(phoneme_average(&f0, &en, &ok, &cfg()).is_ok());
        let too_long = parse_alignment("A\t0.0\t0.094").unwrap();
        assert!(matches!(
            phoneme_average(&f0, &en, &too_long, &cfg()),
            Err(Error::InvalidAlignment(_))
        ));
    }

    fn contiguous_alignment_strategy() -> impl Strategy<Value = PhonemeAlignment> {
        proptest::collection::vec(("[A-Z]{1,3}", 0.01f64..0.3), 1..20).prop_map(|items| {
            let mut entries = Vec::new();
            let mut t = 0.0;
            for (sym, dur) in items {
                entries.push(AlignmentEntry {
                    phoneme: sym,
                    start: t,
                    end: t + dur,
                });
                t += dur;
            }
            PhonemeAlignment::new(entries).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn durations_telescope_for_contiguous_alignments(a in contiguous_alignment_strategy()) {
            let c = cfg();
            let durations = durations_in_frames(&a, &c, 22050);
            let fr = c.frame_rate(22050);
            let span = (a.end_time() * fr).round() as i64
                - (a.entries()[0].start * fr).round() as i64;
            prop_assert_eq!(durations.iter().map(|&d| d as i64).sum::<i64>(), span);
        }

        #[test]
        fn alignment_round_trips_through_tsv(a in contiguous_alignment_strategy()) {
            let reparsed = parse_alignment(&a.to_tsv()).unwrap();
            prop_assert_eq!(reparsed, a);
        }

        #[test]
        fn averaged_pitch_stays_within_contour_bounds(
            values in proptest::collection::vec(
                prop_oneof![Just(0.0f64), 80.0f64..400.0], 6..60,
            )
        ) {
            let f0 = f0_track(values.clone());
            let en = energy_track(vec![1.0; values.len()]);
            let contour = interpolate_unvoiced(&f0);
            let c = cfg();
            let end = (values.len() as f64) / c.frame_rate(22050);
            let mid = end / 2.0;
            let a = PhonemeAlignment::new(vec![
                AlignmentEntry { phoneme: "A".into(), start: 0.0, end: mid },
                AlignmentEntry { phoneme: "B".into(), start: mid, end },
            ]).unwrap();
            let feats = phoneme_average(&f0, &en, &a, &c).unwrap();
            prop_assert_eq!(feats.len(), 2);
            let lo = contour.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = contour.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (&p, &d) in feats.pitch.iter().zip(&feats.duration) {
                if d > 0 {
                    prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
                }
            }
        }
    }
}
