//! The 2-layer feedforward network shared by predictor heads and
//! discriminators, with handwritten backward passes.

use rand::Rng;

/// Negative-side slope of the hidden leaky-ReLU. A saturating activation
/// is unusable here: raw pitch/energy targets and discriminator inputs run
/// in the hundreds, which drives a bounded nonlinearity flat within a few
/// optimizer steps and kills every input gradient.
pub const LEAKY_SLOPE: f64 = 0.1;

/// y = w2 . leaky_relu(w1 x + b1) + b2.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// hidden × input.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w1: vec![vec![0.0; input]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Uniform(-s, s) init with s = 1/sqrt(fan_in): the first layer sees
    /// `input` fan-in, the output layer `hidden`.
    pub fn init(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        let s1 = 1.0 / (input as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: (0..hidden)
                .map(|_| (0..input).map(|_| rng.gen_range(-s1..s1)).collect())
                .collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-s1..s1)).collect(),
            w2: (0..hidden).map(|_| rng.gen_range(-s2..s2)).collect(),
            b2: rng.gen_range(-s2..s2),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    /// Returns (output, hidden activations leaky_relu(w1 x + b1)); the
    /// hidden vector is the cache the backward pass needs.
    pub fn forward(&self, x: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(x.len(), self.input_dim());
        let u: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(row, &b)| {
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            })
            .collect();
        let y = self.w2.iter().zip(&u).map(|(w, v)| w * v).sum::<f64>() + self.b2;
        (y, u)
    }

    pub fn n_params(&self) -> usize {
        self.hidden_dim() * self.input_dim() + self.hidden_dim() * 2 + 1
    }

    pub fn push_params(&self, out: &mut Vec<f64>) {
        for row in &self.w1 {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
    }

    pub fn read_params(&mut self, it: &mut impl Iterator<Item = f64>) -> Option<()> {
        for row in &mut self.w1 {
            for v in row.iter_mut() {
                *v = it.next()?;
            }
        }
        for v in &mut self.b1 {
            *v = it.next()?;
        }
        for v in &mut self.w2 {
            *v = it.next()?;
        }
        self.b2 = it.next()?;
        Some(())
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().flatten().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.is_finite()
    }

    /// Plain gradient-descent step: w -= lr * g.
    pub fn apply_gradient(&mut self, g: &MlpGrads, lr: f64) {
        for (row, grow) in self.w1.iter_mut().zip(&g.w1) {
            for (w, gv) in row.iter_mut().zip(grow) {
                *w -= lr * gv;
            }
        }
        for (b, gv) in self.b1.iter_mut().zip(&g.b1) {
            *b -= lr * gv;
        }
        for (w, gv) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * gv;
        }
        self.b2 -= lr * g.b2;
    }
}

/// Gradient accumulator with the same shape as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpGrads {
    pub fn zeros_like(m: &Mlp) -> Self {
        Self {
            w1: vec![vec![0.0; m.input_dim()]; m.hidden_dim()],
            b1: vec![0.0; m.hidden_dim()],
            w2: vec![0.0; m.hidden_dim()],
            b2: 0.0,
        }
    }

    /// Accumulates d(dy * y)/d(params) for one example and returns
    /// d(dy * y)/dx. `u` must be the hidden cache from the matching forward.
    pub fn backward(&mut self, mlp: &Mlp, x: &[f64], u: &[f64], dy: f64) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        for h in 0..mlp.hidden_dim() {
            self.w2[h] += dy * u[h];
            // The slope is recoverable from the cached activation because
            // leaky_relu preserves sign; u == 0 takes the negative branch.
            let dz = dy * mlp.w2[h] * if u[h] > 0.0 { 1.0 } else { LEAKY_SLOPE };
            self.b1[h] += dz;
            for (i, &xv) in x.iter().enumerate() {
                self.w1[h][i] += dz * xv;
                dx[i] += dz * mlp.w1[h][i];
            }
        }
        self.b2 += dy;
        dx
    }
}
