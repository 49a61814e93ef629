//! Waveform loading and validation.
//!
//! Decodes RIFF/WAVE files (PCM 8/16/24-bit and 32-bit float) into a
//! normalized mono [`Waveform`]. Multi-channel input is downmixed by
//! per-sample channel averaging; integer PCM is scaled to [-1, 1] by the
//! type's maximum magnitude (e.g. -32768 maps to exactly -1.0 for 16-bit).

use std::path::Path;

use crate::error::{Error, Result};

/// Sample rates accepted by the toolkit. Anything else is rejected rather
/// than resampled: silent resampling would corrupt downstream pitch metrics.
pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [16000, 22050, 44100, 48000];

/// A mono audio signal with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Validates and wraps raw samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("empty sample buffer".into()));
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
            return Err(Error::UnsupportedSampleRate(sample_rate));
        }
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() || !(-1.0..=1.0).contains(&s) {
                return Err(Error::InvalidWaveform(format!(
                    "sample {i} out of range: {s}"
                )));
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decodes a RIFF/WAVE file into a mono waveform.
pub fn load_waveform(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();

    if !SUPPORTED_SAMPLE_RATES.contains(&spec.sample_rate) {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate));
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav {
            path: path.into(),
            detail: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 8) => collect_scaled::<i8>(&mut reader, path, 128.0)?,
        (hound::SampleFormat::Int, 16) => collect_scaled::<i16>(&mut reader, path, 32768.0)?,
        (hound::SampleFormat::Int, 24) => collect_scaled::<i32>(&mut reader, path, 8388608.0)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| {
                s.map(|v| f64::from(v).clamp(-1.0, 1.0))
                    .map_err(|e| wav_err(path, e))
            })
            .collect::<Result<_>>()?,
        (fmt, bits) => {
            return Err(Error::Wav {
                path: path.into(),
                detail: format!("unsupported codec: {fmt:?} {bits}-bit"),
            })
        }
    };

    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(Error::Wav {
            path: path.into(),
            detail: "no audio frames".into(),
        });
    }
    let mono: Vec<f64> = (0..frames)
        .map(|f| {
            let frame = &interleaved[f * channels..(f + 1) * channels];
            frame.iter().sum::<f64>() / channels as f64
        })
        .collect();

    Waveform::new(mono, spec.sample_rate)
}

fn collect_scaled<S>(
    reader: &mut hound::WavReader<std::io::BufReader<std::fs::File>>,
    path: &Path,
    denom: f64,
) -> Result<Vec<f64>>
where
    S: hound::Sample + Into<i32>,
{
    reader
        .samples::<S>()
        .map(|s| {
            s.map(|v| f64::from(v.into()) / denom)
                .map_err(|e| wav_err(path, e))
        })
        .collect()
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav {
            path: path.into(),
            detail: other.to_string(),
        },
    }
}
