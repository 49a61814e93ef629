//! Windowing and magnitude-spectrum plumbing shared by the extractors.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Periodic Hann window: w[n] = 0.5 * (1 - cos(2*pi*n / N)).
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Computes one-sided magnitude spectra of Hann-windowed frames, reusing
/// the FFT plan and scratch buffers across frames.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buffer: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(frame_length: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(frame_length);
        Self {
            fft,
            window: hann_window(frame_length),
            buffer: vec![Complex::default(); frame_length],
        }
    }

    /// Magnitudes of bins `0..=N/2` for one frame.
    pub fn magnitudes(&mut self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.window.len(), "frame/window length mismatch");
        for (slot, (&x, &w)) in self.buffer.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.buffer);
        self.buffer[..=frame.len() / 2]
            .iter()
            .map(|c| c.norm())
            .collect()
    }
}
