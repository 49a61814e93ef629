//! Desk-scale variance adaptor: embedding look-up tables plus three
//! 2-layer heads predicting per-phoneme duration (in log(d+1) domain),
//! pitch, and energy, trained with handwritten gradients and optional
//! least-squares adversarial terms.

mod disc;
mod gradcheck;
mod net;
mod train;

pub use disc::{discriminator_score, discriminator_step, loss_adversarial, Element};
pub use gradcheck::{gradient_check, gradient_check_discriminator};
pub(crate) use gradcheck::{assign_disc, assign_params, flatten_disc, flatten_params};
pub use net::{Mlp, MlpGrads};
pub use train::{train_step, TrainBatch, TrainItem, Trainer};

use crate::error::{Error, Result};
use crate::mixer::EmotionLabel;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const N_EMOTIONS: usize = 5;

/// Sliding-window width shared by the three discriminators.
pub const DISC_WINDOW: usize = 4;

/// Model and optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptorConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub phoneme_vocab: usize,
    pub speakers: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl AdaptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0
            || self.hidden_dim == 0
            || self.phoneme_vocab == 0
            || self.speakers == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidConfig(
                "adaptor dimensions and batch size must be >= 1".into(),
            ));
        }
        if !(self.lr_generator > 0.0 && self.lr_discriminator > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rates must be > 0, got generator {} / discriminator {}",
                self.lr_generator, self.lr_discriminator
            )));
        }
        Ok(())
    }

    pub(crate) fn input_dim(&self) -> usize {
        3 * self.embedding_dim
    }
}

/// Generator-side parameters: three embedding tables plus one head per
/// predicted element.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptorParams {
    pub phoneme_table: Vec<Vec<f64>>,
    pub speaker_table: Vec<Vec<f64>>,
    pub emotion_table: Vec<Vec<f64>>,
    pub duration_head: Mlp,
    pub pitch_head: Mlp,
    pub energy_head: Mlp,
}

impl AdaptorParams {
    pub fn embedding_dim(&self) -> usize {
        self.emotion_table.first().map_or(0, Vec::len)
    }

    pub fn is_finite(&self) -> bool {
        let tables = self
            .phoneme_table
            .iter()
            .chain(&self.speaker_table)
            .chain(&self.emotion_table);
        tables.flatten().all(|v| v.is_finite())
            && self.duration_head.is_finite()
            && self.pitch_head.is_finite()
            && self.energy_head.is_finite()
    }

    pub fn heads(&self) -> [&Mlp; 3] {
        [&self.duration_head, &self.pitch_head, &self.energy_head]
    }
}

/// Adversary-side parameters: one window discriminator per element.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub duration: Mlp,
    pub pitch: Mlp,
    pub energy: Mlp,
}

impl DiscriminatorParams {
    pub fn is_finite(&self) -> bool {
        self.duration.is_finite() && self.pitch.is_finite() && self.energy.is_finite()
    }
}

/// Draws all parameters from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
/// deterministically in `cfg.seed`. Embedding tables use their own row
/// width as fan-in.
pub fn init_params(cfg: &AdaptorConfig) -> Result<(AdaptorParams, DiscriminatorParams)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let e = cfg.embedding_dim;
    let s_table = 1.0 / (e as f64).sqrt();
    let table = |rows: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                (0..e)
                    .map(|_| rand::Rng::gen_range(rng, -s_table..s_table))
                    .collect()
            })
            .collect()
    };

    let phoneme_table = table(cfg.phoneme_vocab, &mut rng);
    let speaker_table = table(cfg.speakers, &mut rng);
    let emotion_table = table(N_EMOTIONS, &mut rng);
    let params = AdaptorParams {
        phoneme_table,
        speaker_table,
        emotion_table,
        duration_head: Mlp::init(cfg.hidden_dim, cfg.input_dim(), &mut rng),
        pitch_head: Mlp::init(cfg.hidden_dim, cfg.input_dim(), &mut rng),
        energy_head: Mlp::init(cfg.hidden_dim, cfg.input_dim(), &mut rng),
    };
    let disc = DiscriminatorParams {
        duration: Mlp::init(cfg.hidden_dim, DISC_WINDOW, &mut rng),
        pitch: Mlp::init(cfg.hidden_dim, DISC_WINDOW, &mut rng),
        energy: Mlp::init(cfg.hidden_dim, DISC_WINDOW, &mut rng),
    };
    Ok((params, disc))
}

/// Emotion conditioning: the head input carries
/// lambda * emb(emo_i) + (1 - lambda) * emb(emo_j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionCondition {
    pub emo_i: EmotionLabel,
    pub emo_j: EmotionLabel,
    pub lambda: f64,
}

impl EmotionCondition {
    pub fn new(emo_i: EmotionLabel, emo_j: EmotionLabel, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Adaptor(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self {
            emo_i,
            emo_j,
            lambda,
        })
    }

    /// Full-intensity conditioning on a single emotion.
    pub fn pure(e: EmotionLabel) -> Self {
        Self {
            emo_i: e,
            emo_j: e,
            lambda: 1.0,
        }
    }

    /// The blended emotion embedding. Endpoint lambdas copy a table row
    /// bit-for-bit, so conditioning at lambda = 1 is exactly pure emo_i.
    pub fn embedding(&self, emotion_table: &[Vec<f64>]) -> Vec<f64> {
        let row_i = &emotion_table[self.emo_i as usize];
        let row_j = &emotion_table[self.emo_j as usize];
        if self.lambda == 1.0 {
            return row_i.clone();
        }
        if self.lambda == 0.0 {
            return row_j.clone();
        }
        row_i
            .iter()
            .zip(row_j)
            .map(|(&a, &b)| self.lambda * a + (1.0 - self.lambda) * b)
            .collect()
    }
}

/// Sinusoidal position encoding of dimension `dim` for position `k`:
/// even components sin(k / 10000^(2m/dim)), odd components the cosine of
/// the same angle.
pub fn positional_encoding(k: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let exponent = (2 * (d / 2)) as f64 / dim as f64;
            let angle = k as f64 / 10000f64.powf(exponent);
            if d % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Per-phoneme predictions; duration lives in log(d + 1) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub log_duration: Vec<f64>,
    pub pitch: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.log_duration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_duration.is_empty()
    }
}

/// Builds the per-phoneme head input: (phoneme embedding + position
/// encoding) ++ speaker embedding ++ blended emotion embedding.
fn head_input(
    params: &AdaptorParams,
    phoneme_id: usize,
    position: usize,
    speaker_row: &[f64],
    emotion_row: &[f64],
) -> Vec<f64> {
    let e = params.embedding_dim();
    let mut x = Vec::with_capacity(3 * e);
    let pe = positional_encoding(position, e);
    for (v, p) in params.phoneme_table[phoneme_id].iter().zip(&pe) {
        x.push(v + p);
    }
    x.extend_from_slice(speaker_row);
    x.extend_from_slice(emotion_row);
    x
}

pub(crate) struct ForwardCache {
    pub xs: Vec<Vec<f64>>,
    /// Hidden activations per head: [duration, pitch, energy][phoneme].
    pub hidden: [Vec<Vec<f64>>; 3],
    pub pred: Prediction,
}

pub(crate) fn forward_cached(
    params: &AdaptorParams,
    phoneme_ids: &[usize],
    speaker: usize,
    cond: &EmotionCondition,
) -> Result<ForwardCache> {
    if phoneme_ids.is_empty() {
        return Err(Error::Adaptor("empty phoneme sequence".into()));
    }
    if speaker >= params.speaker_table.len() {
        return Err(Error::Adaptor(format!(
            "speaker id {speaker} outside table of {}",
            params.speaker_table.len()
        )));
    }
    if let Some(&bad) = phoneme_ids.iter().find(|&&p| p >= params.phoneme_table.len()) {
        return Err(Error::Adaptor(format!(
            "phoneme id {bad} outside table of {}",
            params.phoneme_table.len()
        )));
    }

    let speaker_row = params.speaker_table[speaker].clone();
    let emotion_row = cond.embedding(&params.emotion_table);
    let n = phoneme_ids.len();
    let mut xs = Vec::with_capacity(n);
    let mut hidden = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    let mut pred = Prediction {
        log_duration: Vec::with_capacity(n),
        pitch: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
    };
    for (k, &pid) in phoneme_ids.iter().enumerate() {
        let x = head_input(params, pid, k, &speaker_row, &emotion_row);
        for (h, head) in params.heads().into_iter().enumerate() {
            let (y, u) = head.forward(&x);
            hidden[h].push(u);
            match h {
                0 => pred.log_duration.push(y),
                1 => pred.pitch.push(y),
                _ => pred.energy.push(y),
            }
        }
        xs.push(x);
    }
    Ok(ForwardCache { xs, hidden, pred })
}

/// Predicts per-phoneme log-duration, pitch, and energy for one utterance.
pub fn forward(
    params: &AdaptorParams,
    phoneme_ids: &[usize],
    speaker: usize,
    cond: &EmotionCondition,
) -> Result<Prediction> {
    Ok(forward_cached(params, phoneme_ids, speaker, cond)?.pred)
}

/// Mean-square regression losses (L_d, L_p, L_e); durations are compared
/// in log(d + 1) domain.
pub fn loss_regression(
    pred: &Prediction,
    duration: &[u32],
    pitch: &[f64],
    energy: &[f64],
) -> Result<(f64, f64, f64)> {
    let n = pred.len();
    if n == 0 || duration.len() != n || pitch.len() != n || energy.len() != n {
        return Err(Error::Adaptor(format!(
            "regression target lengths ({}, {}, {}) do not match prediction {}",
            duration.len(),
            pitch.len(),
            energy.len(),
            n
        )));
    }
    let mse = |pred: &[f64], target: &mut dyn Iterator<Item = f64>| -> f64 {
        pred.iter()
            .zip(target)
            .map(|(&y, t)| (t - y) * (t - y))
            .sum::<f64>()
            / n as f64
    };
    let l_d = mse(
        &pred.log_duration,
        &mut duration.iter().map(|&d| (d as f64 + 1.0).ln()),
    );
    let l_p = mse(&pred.pitch, &mut pitch.iter().copied());
    let l_e = mse(&pred.energy, &mut energy.iter().copied());
    Ok((l_d, l_p, l_e))
}

/// Loss components of one training step, all evaluated before the step's
/// parameter updates. Adversarial fields are `None` when the run trains
/// without discriminators; composites always equal the sum of their parts.
///
/// At this scale the categorical phase carries no spectrogram term, so
/// `l_categorical` is the sum of the three regression losses alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_d: f64,
    pub l_p: f64,
    pub l_e: f64,
    pub l_d_tilde: f64,
    pub l_p_tilde: f64,
    pub l_e_tilde: f64,
    pub l_adv_d: Option<f64>,
    pub l_adv_p: Option<f64>,
    pub l_adv_e: Option<f64>,
    pub l_categorical: f64,
    pub l_intermediate: f64,
    pub l_total: f64,
}

impl LossReport {
    /// Fails with the first non-finite component, for divergence reports.
    pub fn check_finite(&self, step: u64) -> Result<()> {
        let named = [
            ("l_d", Some(self.l_d)),
            ("l_p", Some(self.l_p)),
            ("l_e", Some(self.l_e)),
            ("l_d_tilde", Some(self.l_d_tilde)),
            ("l_p_tilde", Some(self.l_p_tilde)),
            ("l_e_tilde", Some(self.l_e_tilde)),
            ("l_adv_d", self.l_adv_d),
            ("l_adv_p", self.l_adv_p),
            ("l_adv_e", self.l_adv_e),
            ("l_categorical", Some(self.l_categorical)),
            ("l_intermediate", Some(self.l_intermediate)),
            ("l_total", Some(self.l_total)),
        ];
        for (term, value) in named {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::Divergence {
                        step,
                        term: term.into(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}
