//! HTK-style mel filterbank and the log/DCT stage of cepstrum extraction.

const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over the one-sided spectrum, with centers equally
/// spaced on the HTK mel scale between 0 Hz and Nyquist.
pub struct MelFilterbank {
    /// `weights[m]` holds one row of length `n_fft / 2 + 1`.
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();

        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let rising = (f - lo) / (center - lo);
                        let falling = (hi - f) / (hi - center);
                        rising.min(falling).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Self { weights }
    }

    /// Filter outputs: dot product of each triangle with the magnitudes.
    pub fn apply(&self, magnitudes: Vec<f64>) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| {
                debug_assert_eq!(row.len(), magnitudes.len());
                row.iter().zip(&magnitudes).map(|(w, m)| w * m).sum()
            })
            .collect()
    }
}

/// Log-compresses filterbank outputs (natural log, floored at 1e-10) and
/// applies an orthonormal DCT-II, keeping the first `n_cepstra` terms.
pub fn cepstra_from_filter_energies(energies: &[f64], n_cepstra: usize) -> Vec<f64> {
    let m = energies.len();
    let logs: Vec<f64> = energies.iter().map(|&e| e.max(LOG_FLOOR).ln()).collect();
    let norm0 = (1.0 / m as f64).sqrt();
    let norm = (2.0 / m as f64).sqrt();
    (0..n_cepstra)
        .map(|k| {
            let sum: f64 = logs
                .iter()
                .enumerate()
                .map(|(n, &x)| {
                    x * (std::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * m) as f64).cos()
                })
                .sum();
            if k == 0 {
                norm0 * sum
            } else {
                norm * sum
            }
        })
        .collect()
}
