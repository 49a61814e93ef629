//! Per-frame YIN pitch detection (difference function, cumulative-mean
//! normalization, absolute threshold, parabolic refinement).

use crate::error::{Error, Result};
use crate::signal::AnalysisConfig;

/// Immutable per-run YIN state: lag search band and thresholds derived from
/// the analysis config and sample rate.
pub struct YinFrame {
    window: usize,
    tau_min: usize,
    tau_max: usize,
    threshold: f64,
    f0_min: f64,
    f0_max: f64,
    sample_rate: f64,
}

impl YinFrame {
    pub fn new(cfg: &AnalysisConfig, sample_rate: u32) -> Result<Self> {
        let sr = sample_rate as f64;
        // The difference function integrates over half the frame, so lags are
        // limited to window - 1.
        let window = cfg.frame_length / 2;
        let tau_min = ((sr / cfg.f0_max).floor() as usize).max(1);
        let tau_max = ((sr / cfg.f0_min).ceil() as usize).min(window.saturating_sub(1));
        if tau_min + 1 >= tau_max {
            return Err(Error::InvalidConfig(format!(
                "frame_length {} too short for f0_min {} at {} Hz (lag band {}..{})",
                cfg.frame_length, cfg.f0_min, sample_rate, tau_min, tau_max
            )));
        }
        Ok(Self {
            window,
            tau_min,
            tau_max,
            threshold: cfg.yin_threshold,
            f0_min: cfg.f0_min,
            f0_max: cfg.f0_max,
            sample_rate: sr,
        })
    }

    /// Returns the detected F0 in Hz, or `None` for an unvoiced frame.
    pub fn detect(&self, frame: &[f64]) -> Option<f64> {
        let cmnd = self.cumulative_mean_difference(frame);
        let tau = self.pick_lag(&cmnd)?;
        let refined = parabolic_refine(&cmnd, tau);
        let f0 = self.sample_rate / refined;
        if (self.f0_min..=self.f0_max).contains(&f0) {
            Some(f0)
        } else {
            None
        }
    }

    /// d'(tau) = d(tau) * tau / sum_{j<=tau} d(j), with d'(0) = 1, where
    /// d(tau) = sum_{j<W} (x[j] - x[j+tau])^2.
    fn cumulative_mean_difference(&self, frame: &[f64]) -> Vec<f64> {
        // One lag beyond the band so the refinement step always has a right
        // neighbour when the minimum falls on tau_max.
        let upper = (self.tau_max + 1).min(self.window - 1);
        let mut cmnd = vec![1.0; upper + 1];
        let mut running = 0.0;
        for tau in 1..=upper {
            let mut d = 0.0;
            for j in 0..self.window {
                let delta = frame[j] - frame[j + tau];
                d += delta * delta;
            }
            running += d;
            cmnd[tau] = if running > 0.0 { d * tau as f64 / running } else { 1.0 };
        }
        cmnd
    }

    /// First lag in the band dipping below the threshold, walked forward to
    /// the bottom of its local valley. `None` when no lag qualifies.
    fn pick_lag(&self, cmnd: &[f64]) -> Option<usize> {
        let mut tau = self.tau_min;
        while tau <= self.tau_max {
            if cmnd[tau] < self.threshold {
                while tau + 1 < cmnd.len() && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                return Some(tau);
            }
            tau += 1;
        }
        None
    }
}

/// Fits a parabola through the CMND values at tau - 1, tau, tau + 1 and
/// returns the interpolated abscissa of its minimum.
fn parabolic_refine(cmnd: &[f64], tau: usize) -> f64 {
    if tau == 0 || tau + 1 >= cmnd.len() {
        return tau as f64;
    }
    let (s0, s1, s2) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = s0 - 2.0 * s1 + s2;
    if denom.abs() < 1e-12 {
        return tau as f64;
    }
    let offset = (s0 - s2) / (2.0 * denom);
    // A well-formed valley keeps the vertex within one lag of the sample
    // minimum; clamp to guard against degenerate plateaus.
    tau as f64 + offset.clamp(-1.0, 1.0)
}
