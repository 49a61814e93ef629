//! Frame-level acoustic feature extraction.
//!
//! Three extractors share one framing scheme (no padding, hop-aligned
//! windows): F0 via YIN, per-frame spectral energy, and mel cepstra for
//! distortion metrics. For a waveform of `len` samples every extractor
//! produces exactly `(len - frame_length) / hop_length + 1` frames, so
//! tracks from the same waveform are always frame-parallel.

mod mel;
mod spectrum;
mod yin;

pub use mel::cepstra_from_filter_energies;
pub use spectrum::hann_window;

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Analysis parameters shared by all frame-level extractors.
///
/// Defaults follow the 22050 Hz FastSpeech2 convention: 1024-sample frames,
/// 256-sample hop, 80 mel bands, 13 cepstra.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub frame_length: usize,
    pub hop_length: usize,
    pub f0_min: f64,
    pub f0_max: f64,
    pub yin_threshold: f64,
    pub n_mels: usize,
    pub n_cepstra: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop_length: 256,
            f0_min: 70.0,
            f0_max: 600.0,
            yin_threshold: 0.15,
            n_mels: 80,
            n_cepstra: 13,
        }
    }
}

impl AnalysisConfig {
    /// Checks the config against a concrete sample rate.
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.frame_length {
            return Err(Error::InvalidConfig(format!(
                "hop_length {} must satisfy 0 < hop <= frame_length {}",
                self.hop_length, self.frame_length
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "f0 band [{}, {}] must satisfy 0 < min < max < {nyquist}",
                self.f0_min, self.f0_max
            )));
        }
        if !(self.yin_threshold > 0.0 && self.yin_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "yin_threshold {} must lie in (0, 1)",
                self.yin_threshold
            )));
        }
        if self.n_cepstra == 0 || self.n_cepstra > self.n_mels {
            return Err(Error::InvalidConfig(format!(
                "n_cepstra {} must satisfy 1 <= n_cepstra <= n_mels {}",
                self.n_cepstra, self.n_mels
            )));
        }
        Ok(())
    }

    /// Frames per second, `sample_rate / hop_length`.
    pub fn frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop_length as f64
    }
}

/// Number of hop-aligned frames for a signal of `len` samples.
pub fn frame_count(len: usize, cfg: &AnalysisConfig) -> Result<usize> {
    if len < cfg.frame_length {
        return Err(Error::WaveformTooShort {
            len,
            frame_length: cfg.frame_length,
        });
    }
    Ok((len - cfg.frame_length) / cfg.hop_length + 1)
}

/// Frame-level fundamental frequency track. `values[i] == 0` encodes an
/// unvoiced frame; `voiced` mirrors that as booleans.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub values: Vec<f64>,
    pub voiced: Vec<bool>,
    pub hop_length: usize,
    pub sample_rate: u32,
}

impl F0Track {
    pub fn new(values: Vec<f64>, voiced: Vec<bool>, hop_length: usize, sample_rate: u32) -> Result<Self> {
        if values.len() != voiced.len() {
            return Err(Error::TrackMismatch(format!(
                "f0 values ({}) and voiced flags ({}) differ in length",
                values.len(),
                voiced.len()
            )));
        }
        for (i, (&v, &flag)) in values.iter().zip(&voiced).enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::TrackMismatch(format!("f0[{i}] invalid: {v}")));
            }
            if flag == (v == 0.0) {
                return Err(Error::TrackMismatch(format!(
                    "f0[{i}] = {v} inconsistent with voiced flag {flag}"
                )));
            }
        }
        Ok(Self {
            values,
            voiced,
            hop_length,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Frame-level energy track: L2 norm of the Hann-windowed magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrack {
    pub values: Vec<f64>,
    pub hop_length: usize,
    pub sample_rate: u32,
}

impl EnergyTrack {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mel-cepstral frames; coefficient 0 carries the frame log-energy term.
#[derive(Debug, Clone, PartialEq)]
pub struct MelCepstraTrack {
    pub frames: Vec<Vec<f64>>,
    pub hop_length: usize,
    pub sample_rate: u32,
}

impl MelCepstraTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_cepstra(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

/// Estimates per-frame F0 with YIN (cumulative-mean-normalized difference
/// plus parabolic refinement). Frames without a dip below `yin_threshold`,
/// or whose refined candidate leaves `[f0_min, f0_max]`, are unvoiced.
pub fn estimate_f0(w: &Waveform, cfg: &AnalysisConfig) -> Result<F0Track> {
    cfg.validate(w.sample_rate())?;
    let n_frames = frame_count(w.len(), cfg)?;
    let detector = yin::YinFrame::new(cfg, w.sample_rate())?;

    let mut values = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * cfg.hop_length;
        let frame = &w.samples()[start..start + cfg.frame_length];
        match detector.detect(frame) {
            Some(f0) => {
                values.push(f0);
                voiced.push(true);
            }
            None => {
                values.push(0.0);
                voiced.push(false);
            }
        }
    }
    F0Track::new(values, voiced, cfg.hop_length, w.sample_rate())
}

/// Per-frame energy: L2 norm of the one-sided magnitude spectrum of the
/// Hann-windowed frame.
pub fn compute_energy(w: &Waveform, cfg: &AnalysisConfig) -> Result<EnergyTrack> {
    cfg.validate(w.sample_rate())?;
    let n_frames = frame_count(w.len(), cfg)?;
    let mut analyzer = spectrum::SpectrumAnalyzer::new(cfg.frame_length);

    let values = (0..n_frames)
        .map(|i| {
            let start = i * cfg.hop_length;
            let mags = analyzer.magnitudes(&w.samples()[start..start + cfg.frame_length]);
            mags.iter().map(|m| m * m).sum::<f64>().sqrt()
        })
        .collect();
    Ok(EnergyTrack {
        values,
        hop_length: cfg.hop_length,
        sample_rate: w.sample_rate(),
    })
}

/// Mel cepstra per frame: magnitude spectrum, HTK-mel triangular filterbank,
/// natural log floored at 1e-10, orthonormal DCT-II truncated to `n_cepstra`.
pub fn compute_mel_cepstra(w: &Waveform, cfg: &AnalysisConfig) -> Result<MelCepstraTrack> {
    cfg.validate(w.sample_rate())?;
    let n_frames = frame_count(w.len(), cfg)?;
    let mut analyzer = spectrum::SpectrumAnalyzer::new(cfg.frame_length);
    let filterbank = mel::MelFilterbank::new(cfg.n_mels, cfg.frame_length, w.sample_rate());

    let frames = (0..n_frames)
        .map(|i| {
            let start = i * cfg.hop_length;
            let mags = analyzer.magnitudes(&w.samples()[start..start + cfg.frame_length]);
            let energies = filterbank.apply(mags);
            cepstra_from_filter_energies(&energies, cfg.n_cepstra)
        })
        .collect();
    Ok(MelCepstraTrack {
        frames,
        hop_length: cfg.hop_length,
        sample_rate: w.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(freq: f64, seconds: f64, rate: u32) -> Waveform {
        let n = (seconds * rate as f64) as usize;
        let samples = (0..n)
            .map(|i| 0.6 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    fn silence(seconds: f64, rate: u32) -> Waveform {
        let n = (seconds * rate as f64) as usize;
        Waveform::new(vec![0.0; n], rate).unwrap()
    }

    #[test]
    fn f0_of_pure_220hz_tone() {
        let cfg = AnalysisConfig::default();
        let track = estimate_f0(&sine(220.0, 1.0, 22050), &cfg).unwrap();

        let voiced_count = track.voiced.iter().filter(|&&v| v).count();
        assert!(
            voiced_count as f64 >= 0.95 * track.len() as f64,
            "only {voiced_count}/{} frames voiced",
            track.len()
        );

        let mut voiced_values: Vec<f64> = track
            .values
            .iter()
            .zip(&track.voiced)
            .filter(|(_, &v)| v)
            .map(|(&f, _)| f)
            .collect();
        voiced_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = voiced_values[voiced_values.len() / 2];
        assert!(
            (median - 220.0).abs() <= 2.0,
            "median F0 {median} outside 220 +- 2"
        );
    }

    #[test]
    fn silence_is_fully_unvoiced() {
        let cfg = AnalysisConfig::default();
        let track = estimate_f0(&silence(0.5, 22050), &cfg).unwrap();
        assert!(track.voiced.iter().all(|&v| !v));
        assert!(track.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..22050).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let w = Waveform::new(samples, 22050).unwrap();
        let track = estimate_f0(&w, &AnalysisConfig::default()).unwrap();
        let unvoiced = track.voiced.iter().filter(|&&v| !v).count();
        assert!(
            unvoiced as f64 >= 0.8 * track.len() as f64,
            "only {unvoiced}/{} frames unvoiced",
            track.len()
        );
    }

    #[test]
    fn f0_values_stay_within_search_band() {
        let cfg = AnalysisConfig::default();
        for freq in [90.0, 220.0, 350.0] {
            let track = estimate_f0(&sine(freq, 0.3, 22050), &cfg).unwrap();
            for &v in &track.values {
                assert!(v == 0.0 || (cfg.f0_min..=cfg.f0_max).contains(&v));
            }
        }
    }

    #[test]
    fn energy_of_silence_is_zero() {
        let track = compute_energy(&silence(0.2, 22050), &AnalysisConfig::default()).unwrap();
        assert!(track.values.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn energy_doubles_exactly_with_amplitude() {
        let cfg = AnalysisConfig::default();
        let quiet: Vec<f64> = sine(150.0, 0.3, 22050).samples().iter().map(|s| 0.5 * s).collect();
        let w = Waveform::new(quiet, 22050).unwrap();
        let doubled = Waveform::new(w.samples().iter().map(|s| 2.0 * s).collect(), 22050).unwrap();

        let base = compute_energy(&w, &cfg).unwrap();
        let twice = compute_energy(&doubled, &cfg).unwrap();
        for (a, b) in base.values.iter().zip(&twice.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn energy_is_homogeneous_in_amplitude() {
        let cfg = AnalysisConfig::default();
        let w = sine(180.0, 0.3, 22050);
        let alpha = 0.37;
        let scaled = Waveform::new(w.samples().iter().map(|s| alpha * s).collect(), 22050).unwrap();

        let base = compute_energy(&w, &cfg).unwrap();
        let got = compute_energy(&scaled, &cfg).unwrap();
        for (a, b) in base.values.iter().zip(&got.values) {
            assert!((alpha * a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    // Brute-force O(N^2) discrete transform over the one-sided bins,
    // written independently of the fft-backed implementation.
    fn dft_energy_oracle(frame: &[f64]) -> f64 {
        let n = frame.len();
        let windowed: Vec<f64> = frame
            .iter()
            .enumerate()
            .map(|(i, &x)| x * 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        let mut sum_sq = 0.0;
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (j, &x) in windowed.iter().enumerate() {
                let angle = -2.0 * PI * k as f64 * j as f64 / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            sum_sq += re * re + im * im;
        }
        sum_sq.sqrt()
    }

    #[test]
    fn energy_matches_direct_transform_for_center_impulse() {
        let cfg = AnalysisConfig {
            frame_length: 1024,
            hop_length: 1024,
            ..AnalysisConfig::default()
        };
        let mut samples = vec![0.0; 1024];
        samples[512] = 1.0;
        let w = Waveform::new(samples.clone(), 22050).unwrap();

        let track = compute_energy(&w, &cfg).unwrap();
        assert_eq!(track.len(), 1);
        let expected = dft_energy_oracle(&samples);
        assert!(
            (track.values[0] - expected).abs() <= 1e-9 * expected,
            "impulse energy {} vs oracle {}",
            track.values[0],
            expected
        );

        // The impulse picks out a single window sample, so the magnitude is
        // flat across bins: w[512] * sqrt(513).
        let window_mid = 0.5 * (1.0 - (2.0 * PI * 512.0 / 1024.0).cos());
        let closed_form = window_mid * (513.0f64).sqrt();
        assert!((track.values[0] - closed_form).abs() <= 1e-9 * closed_form);
    }

    #[test]
    fn energy_matches_direct_transform_on_random_frame() {
        let cfg = AnalysisConfig {
            frame_length: 256,
            hop_length: 256,
            n_mels: 40,
            ..AnalysisConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..256).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let w = Waveform::new(samples.clone(), 22050).unwrap();

        let track = compute_energy(&w, &cfg).unwrap();
        let expected = dft_energy_oracle(&samples);
        assert!((track.values[0] - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn cepstra_of_silence_follow_log_floor() {
        let cfg = AnalysisConfig::default();
        let track = compute_mel_cepstra(&silence(0.2, 22050), &cfg).unwrap();
        let floor_log = 1e-10f64.ln();
        let expected_c0 = (cfg.n_mels as f64).sqrt() * floor_log;
        for frame in &track.frames {
            assert_eq!(frame.len(), cfg.n_cepstra);
            assert!((frame[0] - expected_c0).abs() <= 1e-9);
            for &c in &frame[1..] {
                assert!(c.abs() <= 1e-9, "non-zero higher cepstrum {c} for silence");
            }
        }
    }

    #[test]
    fn extractors_are_deterministic() {
        let cfg = AnalysisConfig::default();
        let w = sine(200.0, 0.5, 22050);
        assert_eq!(estimate_f0(&w, &cfg).unwrap(), estimate_f0(&w, &cfg).unwrap());
        assert_eq!(
            compute_energy(&w, &cfg).unwrap(),
            compute_energy(&w, &cfg).unwrap()
        );
        assert_eq!(
            compute_mel_cepstra(&w, &cfg).unwrap(),
            compute_mel_cepstra(&w, &cfg).unwrap()
        );
    }

    #[test]
    fn extractors_agree_on_frame_count() {
        let cfg = AnalysisConfig::default();
        for len in [1024usize, 1025, 5000, 22050, 33000] {
            let samples = vec![0.01; len];
            let w = Waveform::new(samples, 22050).unwrap();
            let expected = (len - cfg.frame_length) / cfg.hop_length + 1;
            assert_eq!(estimate_f0(&w, &cfg).unwrap().len(), expected);
            assert_eq!(compute_energy(&w, &cfg).unwrap().len(), expected);
            assert_eq!(compute_mel_cepstra(&w, &cfg).unwrap().len(), expected);
        }
    }

    #[test]
    fn short_waveform_is_rejected() {
        let cfg = AnalysisConfig::default();
        let w = Waveform::new(vec![0.1; 512], 22050).unwrap();
        assert!(matches!(
            estimate_f0(&w, &cfg),
            Err(Error::WaveformTooShort { .. })
        ));
        assert!(compute_energy(&w, &cfg).is_err());
        assert!(compute_mel_cepstra(&w, &cfg).is_err());
    }
}
