//! Quantitative evaluation: DTW-aligned mel-cepstral distortion, F0 RMSE
//! over mutually voiced frames, mel MAE, and pitch-contour export.

use crate::error::{Error, Result};
use crate::signal::{F0Track, MelCepstraTrack};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Monotone alignment between a reference and a candidate frame sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtwPath {
    steps: Vec<(usize, usize)>,
}

impl DtwPath {
    /// Validates the step structure: starts at (0, 0) and each move
    /// increments i, j, or both by exactly one.
    pub fn new(steps: Vec<(usize, usize)>) -> Result<Self> {
        match steps.first() {
            None => return Err(Error::Metric("empty alignment path".into())),
            Some(&(0, 0)) => {}
            Some(&(i, j)) => {
                return Err(Error::Metric(format!("path starts at ({i}, {j}), not (0, 0)")));
            }
        }
        for w in steps.windows(2) {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            let (di, dj) = (i1.wrapping_sub(i0), j1.wrapping_sub(j0));
            if !matches!((di, dj), (0, 1) | (1, 0) | (1, 1)) {
                return Err(Error::Metric(format!(
                    "invalid path step ({i0}, {j0}) -> ({i1}, {j1})"
                )));
            }
        }
        Ok(Self { steps })
    }

    /// The self-alignment of a length-`len` sequence.
    pub fn diagonal(len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| (i, i)).collect())
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn end(&self) -> (usize, usize) {
        *self.steps.last().expect("validated non-empty")
    }

    /// Errors unless the path spans exactly `ref_len` x `cand_len` frames.
    pub fn check_spans(&self, ref_len: usize, cand_len: usize) -> Result<()> {
        if ref_len == 0 || cand_len == 0 {
            return Err(Error::Metric("cannot align an empty track".into()));
        }
        if self.end() != (ref_len - 1, cand_len - 1) {
            let (i, j) = self.end();
            return Err(Error::Metric(format!(
                "path ends at ({i}, {j}) but tracks have {ref_len} and {cand_len} frames"
            )));
        }
        Ok(())
    }
}

/// One utterance pair's evaluation results. `frames_compared` counts DTW
/// path steps; `voiced_frames_compared` the mutually voiced subset used
/// for the F0 error (0 means the RMSE is a placeholder, not a measurement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mcd_db: f64,
    pub f0_rmse_hz: f64,
    pub mel_mae: f64,
    pub frames_compared: usize,
    pub voiced_frames_compared: usize,
}

fn check_pair(a: &MelCepstraTrack, b: &MelCepstraTrack) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("cannot align an empty track".into()));
    }
    for t in [a, b] {
        if t.frames.iter().any(|f| f.len() != t.n_cepstra()) {
            return Err(Error::Metric("ragged cepstral frames".into()));
        }
    }
    if a.n_cepstra() != b.n_cepstra() {
        return Err(Error::Metric(format!(
            "coefficient counts differ: {} vs {}",
            a.n_cepstra(),
            b.n_cepstra()
        )));
    }
    Ok(())
}

/// Euclidean distance over coefficients 1.. (the energy-like c0 excluded).
fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .skip(1)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimum-cost monotone alignment under the symmetric step pattern
/// {(1,0), (0,1), (1,1)}; cost ties during backtracking prefer the
/// diagonal, then the reference-advancing step.
pub fn dtw_align(reference: &MelCepstraTrack, candidate: &MelCepstraTrack) -> Result<DtwPath> {
    check_pair(reference, candidate)?;
    let (n, m) = (reference.len(), candidate.len());
    let d = |i: usize, j: usize| frame_distance(&reference.frames[i], &candidate.frames[j]);

    let mut cost = vec![vec![0.0f64; m]; n];
    cost[0][0] = d(0, 0);
    for j in 1..m {
        cost[0][j] = cost[0][j - 1] + d(0, j);
    }
    for i in 1..n {
        cost[i][0] = cost[i - 1][0] + d(i, 0);
        for j in 1..m {
            let best = cost[i - 1][j - 1].min(cost[i - 1][j]).min(cost[i][j - 1]);
            cost[i][j] = best + d(i, j);
        }
    }

    let mut steps = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = cost[i - 1][j - 1];
            if diag <= cost[i - 1][j] && diag <= cost[i][j - 1] {
                (i - 1, j - 1)
            } else if cost[i - 1][j] <= cost[i][j - 1] {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    DtwPath::new(steps)
}

/// Mel-cepstral distortion along an existing path:
/// mean over steps of (10 / ln 10) * sqrt(2 * sum_{k>=1} diff_k^2).
pub fn mcd_along_path(
    reference: &MelCepstraTrack,
    candidate: &MelCepstraTrack,
    path: &DtwPath,
) -> Result<f64> {
    check_pair(reference, candidate)?;
    path.check_spans(reference.len(), candidate.len())?;
    let scale = 10.0 / std::f64::consts::LN_10;
    let total: f64 = path
        .steps()
        .iter()
        .map(|&(i, j)| {
            let d = frame_distance(&reference.frames[i], &candidate.frames[j]);
            scale * (2.0f64).sqrt() * d
        })
        .sum();
    Ok(total / path.len() as f64)
}

/// DTW-aligned mel-cepstral distortion in dB.
pub fn mcd(reference: &MelCepstraTrack, candidate: &MelCepstraTrack) -> Result<f64> {
    let path = dtw_align(reference, candidate)?;
    mcd_along_path(reference, candidate, &path)
}

/// RMSE in Hz over path steps where both frames are voiced, plus the count
/// of such steps. No mutually voiced step yields (0.0, 0).
pub fn f0_rmse(reference: &F0Track, candidate: &F0Track, path: &DtwPath) -> Result<(f64, usize)> {
    path.check_spans(reference.len(), candidate.len())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(i, j) in path.steps() {
        if reference.voiced[i] && candidate.voiced[j] {
            let d = reference.values[i] - candidate.values[j];
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Ok((0.0, 0));
    }
    Ok(((sum / n as f64).sqrt(), n))
}

/// Mean elementwise absolute difference between two equal-shape frame
/// sequences.
pub fn mel_mae(reference: &[Vec<f64>], candidate: &[Vec<f64>]) -> Result<f64> {
    if reference.len() != candidate.len() {
        return Err(Error::Metric(format!(
            "frame counts differ: {} vs {}",
            reference.len(),
            candidate.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (r, c) in reference.iter().zip(candidate) {
        if r.len() != c.len() {
            return Err(Error::Metric(format!(
                "frame widths differ: {} vs {}",
                r.len(),
                c.len()
            )));
        }
        for (x, y) in r.iter().zip(c) {
            sum += (x - y).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Metric("cannot average over zero elements".into()));
    }
    Ok(sum / n as f64)
}

/// Runs the full comparison for one utterance pair. The F0 tracks must be
/// frame-parallel to the mel tracks; all three metrics share one DTW path.
pub fn evaluate_pair(
    reference_mel: &MelCepstraTrack,
    candidate_mel: &MelCepstraTrack,
    reference_f0: &F0Track,
    candidate_f0: &F0Track,
) -> Result<MetricReport> {
    if reference_f0.len() != reference_mel.len() || candidate_f0.len() != candidate_mel.len() {
        return Err(Error::Metric(format!(
            "f0 tracks ({}, {}) are not frame-parallel to mel tracks ({}, {})",
            reference_f0.len(),
            candidate_f0.len(),
            reference_mel.len(),
            candidate_mel.len()
        )));
    }
    let path = dtw_align(reference_mel, candidate_mel)?;
    let mcd_db = mcd_along_path(reference_mel, candidate_mel, &path)?;
    let (f0_rmse_hz, voiced) = f0_rmse(reference_f0, candidate_f0, &path)?;
    let aligned_ref: Vec<Vec<f64>> = path
        .steps()
        .iter()
        .map(|&(i, _)| reference_mel.frames[i].clone())
        .collect();
    let aligned_cand: Vec<Vec<f64>> = path
        .steps()
        .iter()
        .map(|&(_, j)| candidate_mel.frames[j].clone())
        .collect();
    Ok(MetricReport {
        mcd_db,
        f0_rmse_hz,
        mel_mae: mel_mae(&aligned_ref, &aligned_cand)?,
        frames_compared: path.len(),
        voiced_frames_compared: voiced,
    })
}

/// Writes labeled pitch contours as CSV rows
/// `label,time_seconds,f0_hz,voiced` with time = index * hop / rate.
pub fn export_pitch_contour(tracks: &[(String, F0Track)], out: &Path) -> Result<()> {
    if tracks.is_empty() {
        return Err(Error::Metric("no pitch contours to export".into()));
    }
    let mut buf = String::from("label,time_seconds,f0_hz,voiced\n");
    for (label, track) in tracks {
        if label.contains([',', '\n', '\r']) {
            return Err(Error::Metric(format!(
                "label {label:?} cannot contain commas or line breaks"
            )));
        }
        for i in 0..track.len() {
            let t = i as f64 * track.hop_length as f64 / track.sample_rate as f64;
            buf.push_str(&format!(
                "{label},{t},{},{}\n",
                track.values[i],
                u8::from(track.voiced[i])
            ));
        }
    }
    crate::io::write_atomic(out, buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(frames: Vec<Vec<f64>>) -> MelCepstraTrack {
        MelCepstraTrack {
            frames,
            hop_length: 256,
            sample_rate: 22050,
        }
    }

    fn random_track(rng: &mut ChaCha8Rng, len: usize, width: usize) -> MelCepstraTrack {
        track(
            (0..len)
                .map(|_| (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
        )
    }

    fn path_cost(a: &MelCepstraTrack, b: &MelCepstraTrack, path: &DtwPath) -> f64 {
        path.steps()
            .iter()
            .map(|&(i, j)| frame_distance(&a.frames[i], &b.frames[j]))
            .sum()
    }

    /// Exhaustive minimum alignment cost over every monotone path.
    fn brute_force_cost(a: &MelCepstraTrack, b: &MelCepstraTrack) -> f64 {
        fn go(a: &MelCepstraTrack, b: &MelCepstraTrack, i: usize, j: usize) -> f64 {
            let here = frame_distance(&a.frames[i], &b.frames[j]);
            if i + 1 == a.len() && j + 1 == b.len() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            here + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn identical_tracks_align_diagonally() {
        let a = random_track(&mut ChaCha8Rng::seed_from_u64(1), 5, 4);
        let path = dtw_align(&a, &a).unwrap();
        assert_eq!(path, DtwPath::diagonal(5).unwrap());
        assert_eq!(mcd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_frame_costs_one_extra_step() {
        let a = random_track(&mut ChaCha8Rng::seed_from_u64(2), 4, 4);
        let mut frames = a.frames.clone();
        frames.insert(2, frames[2].clone());
        let b = track(frames);
        let path = dtw_align(&a, &b).unwrap();
        assert_eq!(path.len(), a.len() + 1);
        let non_diagonal = path
            .steps()
            .windows(2)
            .filter(|w| {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                (di, dj) != (1, 1)
            })
            .count();
        assert_eq!(non_diagonal, 1);
        assert!(mcd(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_frame_against_three_is_forced() {
        let one = random_track(&mut ChaCha8Rng::seed_from_u64(3), 1, 4);
        let three = random_track(&mut ChaCha8Rng::seed_from_u64(4), 3, 4);
        let path = dtw_align(&one, &three).unwrap();
        assert_eq!(path.steps(), &[(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn unit_difference_in_one_coefficient_is_6_14_db() {
        let a = track(vec![vec![0.3, 1.0, -0.5]]);
        let b = track(vec![vec![0.9, 1.0, 0.5]]);
        let expected = (10.0 / std::f64::consts::LN_10) * (2.0f64).sqrt();
        assert!((mcd(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 6.1415).abs() < 1e-3);
    }

    #[test]
    fn coefficient_zero_is_ignored() {
        let a = track(vec![vec![5.0, 1.0], vec![-3.0, 2.0]]);
        let b = track(vec![vec![0.0, 1.0], vec![7.0, 2.0]]);
        assert_eq!(mcd(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_widths_and_empty_tracks_error() {
        let a = track(vec![vec![0.0; 4]]);
        let b = track(vec![vec![0.0; 3]]);
        assert!(dtw_align(&a, &b).is_err());
        let empty = track(vec![]);
        assert!(dtw_align(&a, &empty).is_err());
        assert!(dtw_align(&empty, &a).is_err());
    }

    #[test]
    fn mcd_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..7usize);
            let m = rng.gen_range(1..7usize);
            let a = random_track(&mut rng, n, 5);
            let b = random_track(&mut rng, m, 5);
            let ab = mcd(&a, &b).unwrap();
            let ba = mcd(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-9, "asymmetry {ab} vs {ba}");
        }
    }

    #[test]
    fn frozen_path_mcd_grows_with_offset_magnitude() {
        let a = random_track(&mut ChaCha8Rng::seed_from_u64(9), 6, 4);
        let path = DtwPath::diagonal(6).unwrap();
        let mut last = -1.0;
        for offset in [0.0, 0.1, 0.5, 2.0] {
            let mut b = a.clone();
            for f in &mut b.frames {
                f[2] += offset;
            }
            let v = mcd_along_path(&a, &b, &path).unwrap();
            assert!(v >= last, "mcd fell from {last} to {v} at offset {offset}");
            last = v;
        }
    }

    fn f0(values: Vec<f64>, voiced: Vec<bool>) -> F0Track {
        F0Track::new(values, voiced, 256, 22050).unwrap()
    }

    #[test]
    fn f0_rmse_on_identical_tracks_is_zero() {
        let t = f0(vec![200.0, 210.0, 0.0], vec![true, true, false]);
        let path = DtwPath::diagonal(3).unwrap();
        let (v, n) = f0_rmse(&t, &t, &path).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(n, 2);
    }

    #[test]
    fn constant_offset_gives_the_offset() {
        let a = f0(vec![200.0; 5], vec![true; 5]);
        let b = f0(vec![210.0; 5], vec![true; 5]);
        let path = DtwPath::diagonal(5).unwrap();
        let (v, n) = f0_rmse(&a, &b, &path).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
        assert_eq!(n, 5);
    }

    #[test]
    fn fully_unvoiced_candidate_flags_zero() {
        let a = f0(vec![200.0; 3], vec![true; 3]);
        let b = f0(vec![0.0; 3], vec![false; 3]);
        let path = DtwPath::diagonal(3).unwrap();
        assert_eq!(f0_rmse(&a, &b, &path).unwrap(), (0.0, 0));
    }

    #[test]
    fn path_length_mismatch_is_rejected() {
        let a = f0(vec![200.0; 3], vec![true; 3]);
        let b = f0(vec![200.0; 4], vec![true; 4]);
        let path = DtwPath::diagonal(3).unwrap();
        assert!(f0_rmse(&a, &b, &path).is_err());
    }

    #[test]
    fn mel_mae_hand_cases() {
        let a = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        let b = vec![vec![1.0, 1.0], vec![2.0, 5.0]];
        assert!((mel_mae(&a, &b).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(mel_mae(&a, &a).unwrap(), 0.0);
        let zeros = vec![vec![0.0; 3]; 2];
        let halves = vec![vec![0.5; 3]; 2];
        assert!((mel_mae(&zeros, &halves).unwrap() - 0.5).abs() < 1e-15);
        assert!(mel_mae(&a, &zeros).is_err());
        assert!(mel_mae(&a, &[]).is_err());
    }

    #[test]
    fn evaluate_pair_reports_consistent_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mel_a = random_track(&mut rng, 6, 4);
        let mel_b = random_track(&mut rng, 8, 4);
        let f0_a = f0(
            vec![100.0, 101.0, 0.0, 103.0, 104.0, 105.0],
            vec![true, true, false, true, true, true],
        );
        let f0_b = f0((0..8).map(|i| 110.0 + i as f64).collect(), vec![true; 8]);
        let r = evaluate_pair(&mel_a, &mel_b, &f0_a, &f0_b).unwrap();
        assert!(r.frames_compared >= 8);
        assert!(r.voiced_frames_compared <= r.frames_compared);
        assert!(r.mcd_db > 0.0 && r.f0_rmse_hz > 0.0 && r.mel_mae > 0.0);
        // Frame-parallel check.
        let short = f0(vec![100.0; 3], vec![true; 3]);
        assert!(evaluate_pair(&mel_a, &mel_b, &short, &f0_b).is_err());
    }

    #[test]
    fn pitch_contour_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("contour.csv");
        let t1 = f0(vec![220.123456, 0.0, 219.5], vec![true, false, true]);
        let t2 = f0(vec![180.25, 181.75], vec![true, true]);
        export_pitch_contour(&[("l0".into(), t1.clone()), ("l1".into(), t2.clone())], &path)
            .unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "label,time_seconds,f0_hz,voiced");
        let rows: Vec<Vec<String>> = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        assert_eq!(rows.len(), 5);

        // Hand-checked frame times for hop 256 at 22050 Hz.
        let t: f64 = rows[1][1].parse().unwrap();
        assert!((t - 0.01161).abs() < 1e-5);
        let t: f64 = rows[2][1].parse().unwrap();
        assert!((t - 0.02322).abs() < 1e-5);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);

        for (row, (expect_label, expect_v, expect_voiced)) in rows.iter().zip([
            ("l0", 220.123456, 1u8),
            ("l0", 0.0, 0),
            ("l0", 219.5, 1),
            ("l1", 180.25, 1),
            ("l1", 181.75, 1),
        ]) {
            assert_eq!(row[0], expect_label);
            let v: f64 = row[2].parse().unwrap();
            assert!((v - expect_v).abs() < 1e-6);
            assert_eq!(row[3].parse::<u8>().unwrap(), expect_voiced);
        }

        assert!(export_pitch_contour(&[], &dir.path().join("x.csv")).is_err());
        assert!(export_pitch_contour(
            &[("bad,label".into(), t2)],
            &dir.path().join("y.csv")
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn dtw_cost_matches_exhaustive_enumeration(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=6usize);
            let m = rng.gen_range(1..=6usize);
            let a = random_track(&mut rng, n, 3);
            let b = random_track(&mut rng, m, 3);
            let path = dtw_align(&a, &b).unwrap();
            let cost = path_cost(&a, &b, &path);
            let oracle = brute_force_cost(&a, &b);
            prop_assert!((cost - oracle).abs() < 1e-9, "dtw {cost} vs oracle {oracle}");
        }

        #[test]
        fn mcd_matches_oracle_mean(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(77));
            let n = rng.gen_range(1..=6usize);
            let m = rng.gen_range(1..=6usize);
            let a = random_track(&mut rng, n, 4);
            let b = random_track(&mut rng, m, 4);
            let path = dtw_align(&a, &b).unwrap();
            let scale = 10.0 / std::f64::consts::LN_10 * (2.0f64).sqrt();
            let expected = scale * path_cost(&a, &b, &path) / path.len() as f64;
            prop_assert!((mcd(&a, &b).unwrap() - expected).abs() < 1e-12);
        }

        #[test]
        fn mel_mae_triangle_bound(
            rows in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 3), 1..5
            ),
            delta in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 3), 1..5
            ),
        ) {
            let n = rows.len().min(delta.len());
            let a: Vec<Vec<f64>> = rows[..n].to_vec();
            let b: Vec<Vec<f64>> = delta[..n].to_vec();
            let c: Vec<Vec<f64>> = a
                .iter()
                .zip(&b)
                .map(|(r, d)| r.iter().zip(d).map(|(x, y)| 0.5 * x + y).collect())
                .collect();
            let ac = mel_mae(&a, &c).unwrap();
            let ab = mel_mae(&a, &b).unwrap();
            let bc = mel_mae(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
