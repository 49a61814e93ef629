//! One-step training (two-phase losses, discriminator-then-generator
//! updates) and the session-level `Trainer` that assembles batches from a
//! corpus plus pseudo-labels.

use super::disc::{disc_loss_gradient, gen_loss_gradient_wrt_fake, loss_adversarial, Element};
use super::net::MlpGrads;
use super::{
    forward_cached, init_params, AdaptorConfig, AdaptorParams, DiscriminatorParams,
    EmotionCondition, ForwardCache, LossReport,
};
use crate::error::{Error, Result};
use crate::mixer::{CorpusIndex, EmotionLabel, PseudoLabel};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One resolved training example: ids into the model's vocabularies, the
/// emotion conditioning, and the target sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub phoneme_ids: Vec<usize>,
    pub speaker_id: usize,
    pub cond: EmotionCondition,
    pub target_duration: Vec<u32>,
    pub target_pitch: Vec<f64>,
    pub target_energy: Vec<f64>,
}

impl TrainItem {
    fn check(&self) -> Result<()> {
        let n = self.phoneme_ids.len();
        if n == 0
            || self.target_duration.len() != n
            || self.target_pitch.len() != n
            || self.target_energy.len() != n
        {
            return Err(Error::Adaptor(format!(
                "item sequences must share non-zero length {n}"
            )));
        }
        Ok(())
    }

    fn log_durations(&self) -> Vec<f64> {
        self.target_duration
            .iter()
            .map(|&d| (d as f64 + 1.0).ln())
            .collect()
    }
}

/// A categorical batch (ground-truth labels, pure conditioning) plus an
/// intermediate batch (pseudo-labels, mixed conditioning).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub categorical: Vec<TrainItem>,
    pub intermediate: Vec<TrainItem>,
}

pub(crate) struct BatchCaches {
    pub categorical: Vec<ForwardCache>,
    pub intermediate: Vec<ForwardCache>,
}

/// Mean of per-item regression losses over a phase.
fn phase_losses(items: &[TrainItem], caches: &[ForwardCache]) -> Result<(f64, f64, f64)> {
    let b = items.len() as f64;
    let (mut l_d, mut l_p, mut l_e) = (0.0, 0.0, 0.0);
    for (item, cache) in items.iter().zip(caches) {
        let (d, p, e) = super::loss_regression(
            &cache.pred,
            &item.target_duration,
            &item.target_pitch,
            &item.target_energy,
        )?;
        l_d += d / b;
        l_p += p / b;
        l_e += e / b;
    }
    Ok((l_d, l_p, l_e))
}

/// Discriminators never see raw pitch/energy: those run in the hundreds,
/// which makes the least-squares critic's curvature (and so its stable
/// learning-rate window) collapse. They are scored through asinh, the
/// sign-safe log-like compressor, matching in spirit the log(d+1) domain
/// durations are already scored in. Duration predictions are produced in
/// log domain, so they pass through unchanged.
fn disc_domain(seq: &[f64], element: Element) -> Vec<f64> {
    match element {
        Element::Duration => seq.to_vec(),
        Element::Pitch | Element::Energy => seq.iter().map(|&v| v.asinh()).collect(),
    }
}

/// d(disc_domain)/dy at a raw prediction y, for chaining adversarial
/// gradients back onto the head outputs.
fn disc_domain_slope(y: f64, element: Element) -> f64 {
    match element {
        Element::Duration => 1.0,
        Element::Pitch | Element::Energy => 1.0 / (1.0 + y * y).sqrt(),
    }
}

pub(crate) fn real_seqs(items: &[TrainItem], element: Element) -> Vec<Vec<f64>> {
    items
        .iter()
        .map(|it| match element {
            Element::Duration => it.log_durations(),
            Element::Pitch => disc_domain(&it.target_pitch, element),
            Element::Energy => disc_domain(&it.target_energy, element),
        })
        .collect()
}

pub(crate) fn fake_seqs(caches: &[ForwardCache], element: Element) -> Vec<Vec<f64>> {
    caches
        .iter()
        .map(|c| match element {
            Element::Duration => c.pred.log_duration.clone(),
            Element::Pitch => disc_domain(&c.pred.pitch, element),
            Element::Energy => disc_domain(&c.pred.energy, element),
        })
        .collect()
}

/// Evaluates every loss term (no updates). Adversarial terms are included
/// only when a discriminator is supplied; reals come from the categorical
/// batch's labels, fakes are the adaptor's intermediate predictions.
pub(crate) fn evaluate(
    params: &AdaptorParams,
    disc: Option<&DiscriminatorParams>,
    batch: &TrainBatch,
) -> Result<(LossReport, BatchCaches)> {
    if batch.categorical.is_empty() || batch.intermediate.is_empty() {
        return Err(Error::Adaptor(
            "both categorical and intermediate batches must be non-empty".into(),
        ));
    }
    for item in batch.categorical.iter().chain(&batch.intermediate) {
        item.check()?;
    }

    let forward_all = |items: &[TrainItem]| -> Result<Vec<ForwardCache>> {
        items
            .iter()
            .map(|it| forward_cached(params, &it.phoneme_ids, it.speaker_id, &it.cond))
            .collect()
    };
    let caches = BatchCaches {
        categorical: forward_all(&batch.categorical)?,
        intermediate: forward_all(&batch.intermediate)?,
    };

    let (l_d, l_p, l_e) = phase_losses(&batch.categorical, &caches.categorical)?;
    let (l_d_tilde, l_p_tilde, l_e_tilde) = phase_losses(&batch.intermediate, &caches.intermediate)?;

    let mut adv = [None, None, None];
    if let Some(disc) = disc {
        for (slot, element) in adv.iter_mut().zip(Element::ALL) {
            let reals = real_seqs(&batch.categorical, element);
            let fakes = fake_seqs(&caches.intermediate, element);
            let (_, gen_loss) = loss_adversarial(disc, element, &reals, &fakes)?;
            *slot = Some(gen_loss);
        }
    }
    let [l_adv_d, l_adv_p, l_adv_e] = adv;

    let l_categorical = l_d + l_p + l_e;
    let l_intermediate = l_adv_d.unwrap_or(0.0)
        + l_adv_p.unwrap_or(0.0)
        + l_adv_e.unwrap_or(0.0)
        + l_d_tilde
        + l_p_tilde
        + l_e_tilde;
    let report = LossReport {
        l_d,
        l_p,
        l_e,
        l_d_tilde,
        l_p_tilde,
        l_e_tilde,
        l_adv_d,
        l_adv_p,
        l_adv_e,
        l_categorical,
        l_intermediate,
        l_total: l_categorical + l_intermediate,
    };
    Ok((report, caches))
}

/// Gradient accumulator shaped like [`AdaptorParams`].
pub(crate) struct AdaptorGrads {
    pub phoneme_table: Vec<Vec<f64>>,
    pub speaker_table: Vec<Vec<f64>>,
    pub emotion_table: Vec<Vec<f64>>,
    pub duration_head: MlpGrads,
    pub pitch_head: MlpGrads,
    pub energy_head: MlpGrads,
}

impl AdaptorGrads {
    fn zeros_like(p: &AdaptorParams) -> Self {
        let zero_table = |t: &Vec<Vec<f64>>| vec![vec![0.0; t[0].len()]; t.len()];
        Self {
            phoneme_table: zero_table(&p.phoneme_table),
            speaker_table: zero_table(&p.speaker_table),
            emotion_table: zero_table(&p.emotion_table),
            duration_head: MlpGrads::zeros_like(&p.duration_head),
            pitch_head: MlpGrads::zeros_like(&p.pitch_head),
            energy_head: MlpGrads::zeros_like(&p.energy_head),
        }
    }

    fn head_mut(&mut self, element: Element) -> &mut MlpGrads {
        match element {
            Element::Duration => &mut self.duration_head,
            Element::Pitch => &mut self.pitch_head,
            Element::Energy => &mut self.energy_head,
        }
    }
}

fn head_of(params: &AdaptorParams, element: Element) -> &super::Mlp {
    match element {
        Element::Duration => &params.duration_head,
        Element::Pitch => &params.pitch_head,
        Element::Energy => &params.energy_head,
    }
}

fn pred_of<'a>(cache: &'a ForwardCache, element: Element) -> &'a [f64] {
    match element {
        Element::Duration => &cache.pred.log_duration,
        Element::Pitch => &cache.pred.pitch,
        Element::Energy => &cache.pred.energy,
    }
}

fn target_of(item: &TrainItem, element: Element) -> Vec<f64> {
    match element {
        Element::Duration => item.log_durations(),
        Element::Pitch => item.target_pitch.clone(),
        Element::Energy => item.target_energy.clone(),
    }
}

fn element_index(element: Element) -> usize {
    match element {
        Element::Duration => 0,
        Element::Pitch => 1,
        Element::Energy => 2,
    }
}

/// Backpropagates output gradients `dys` (one per phoneme, one head) for a
/// single item, accumulating head and table gradients.
fn backward_item(
    params: &AdaptorParams,
    item: &TrainItem,
    cache: &ForwardCache,
    element: Element,
    dys: &[f64],
    grads: &mut AdaptorGrads,
) {
    let e = params.embedding_dim();
    let head = head_of(params, element);
    let hidden = &cache.hidden[element_index(element)];
    for (k, &dy) in dys.iter().enumerate() {
        if dy == 0.0 {
            continue;
        }
        let dx = grads
            .head_mut(element)
            .backward(head, &cache.xs[k], &hidden[k], dy);
        let pid = item.phoneme_ids[k];
        for d in 0..e {
            grads.phoneme_table[pid][d] += dx[d];
            grads.speaker_table[item.speaker_id][d] += dx[e + d];
        }
        let (li, lj) = (item.cond.emo_i as usize, item.cond.emo_j as usize);
        let lambda = item.cond.lambda;
        if lambda == 1.0 {
            for d in 0..e {
                grads.emotion_table[li][d] += dx[2 * e + d];
            }
        } else if lambda == 0.0 {
            for d in 0..e {
                grads.emotion_table[lj][d] += dx[2 * e + d];
            }
        } else {
            for d in 0..e {
                grads.emotion_table[li][d] += lambda * dx[2 * e + d];
                grads.emotion_table[lj][d] += (1.0 - lambda) * dx[2 * e + d];
            }
        }
    }
}

/// Analytic gradient of the full generator objective (regression terms of
/// both phases plus, when a discriminator is given, the generator-side
/// adversarial terms) with respect to the adaptor parameters.
pub(crate) fn generator_gradients(
    params: &AdaptorParams,
    disc: Option<&DiscriminatorParams>,
    batch: &TrainBatch,
    caches: &BatchCaches,
) -> Result<AdaptorGrads> {
    let mut grads = AdaptorGrads::zeros_like(params);

    for (phase, caches_phase) in [
        (&batch.categorical, &caches.categorical),
        (&batch.intermediate, &caches.intermediate),
    ] {
        let b = phase.len() as f64;
        let is_intermediate = std::ptr::eq(phase, &batch.intermediate);
        for (item, cache) in phase.iter().zip(caches_phase) {
            let n = item.phoneme_ids.len() as f64;
            for element in Element::ALL {
                let preds = pred_of(cache, element);
                let targets = target_of(item, element);
                // d/dy of the phase-mean MSE: 2 (y - t) / (n * B).
                let mut dys: Vec<f64> = preds
                    .iter()
                    .zip(&targets)
                    .map(|(&y, &t)| 2.0 * (y - t) / (n * b))
                    .collect();
                if is_intermediate {
                    if let Some(disc) = disc {
                        let scored = disc_domain(preds, element);
                        let adv = gen_loss_gradient_wrt_fake(
                            disc,
                            element,
                            &scored,
                            caches_phase.len(),
                        )?;
                        for ((dy, a), &y) in dys.iter_mut().zip(&adv).zip(preds) {
                            *dy += a * disc_domain_slope(y, element);
                        }
                    }
                }
                backward_item(params, item, cache, element, &dys, &mut grads);
            }
        }
    }
    Ok(grads)
}

fn apply_generator_gradients(params: &mut AdaptorParams, grads: &AdaptorGrads, lr: f64) {
    let step_table = |t: &mut Vec<Vec<f64>>, g: &Vec<Vec<f64>>| {
        for (row, grow) in t.iter_mut().zip(g) {
            for (v, gv) in row.iter_mut().zip(grow) {
                *v -= lr * gv;
            }
        }
    };
    step_table(&mut params.phoneme_table, &grads.phoneme_table);
    step_table(&mut params.speaker_table, &grads.speaker_table);
    step_table(&mut params.emotion_table, &grads.emotion_table);
    params.duration_head.apply_gradient(&grads.duration_head, lr);
    params.pitch_head.apply_gradient(&grads.pitch_head, lr);
    params.energy_head.apply_gradient(&grads.energy_head, lr);
}

/// One training step: report pre-update losses, update the discriminators
/// on their LSGAN loss (fakes held constant), then update the generator on
/// the full objective against the refreshed discriminators. Plain gradient
/// descent on both sides. `step` only labels divergence errors.
pub fn train_step(
    params: &mut AdaptorParams,
    mut disc: Option<&mut DiscriminatorParams>,
    batch: &TrainBatch,
    cfg: &AdaptorConfig,
    step: u64,
) -> Result<LossReport> {
    let (report, caches) = evaluate(params, disc.as_deref(), batch)?;
    report.check_finite(step)?;

    if let Some(disc) = disc.as_deref_mut() {
        for element in Element::ALL {
            let reals = real_seqs(&batch.categorical, element);
            let fakes = fake_seqs(&caches.intermediate, element);
            let grads = disc_loss_gradient(disc, element, &reals, &fakes)?;
            let net = match element {
                Element::Duration => &mut disc.duration,
                Element::Pitch => &mut disc.pitch,
                Element::Energy => &mut disc.energy,
            };
            net.apply_gradient(&grads, cfg.lr_discriminator);
        }
    }

    let gen_grads = generator_gradients(params, disc.as_deref(), batch, &caches)?;
    apply_generator_gradients(params, &gen_grads, cfg.lr_generator);

    if !params.is_finite() || disc.as_deref().is_some_and(|d| !d.is_finite()) {
        return Err(Error::Divergence {
            step,
            term: "updated parameters".into(),
            value: f64::NAN,
        });
    }
    Ok(report)
}

/// Owns model state, vocabularies, and the resolved training pools;
/// assembles one batch per step from seed-derived substreams so the
/// trajectory is reproducible and independent of external state.
pub struct Trainer {
    cfg: AdaptorConfig,
    params: AdaptorParams,
    disc: DiscriminatorParams,
    use_discriminator: bool,
    phonemes: Vec<String>,
    speakers: Vec<String>,
    cat_pool: Vec<TrainItem>,
    int_pool: Vec<TrainItem>,
    step: u64,
}

impl Trainer {
    /// Builds vocabularies from the corpus, initializes parameters from
    /// `cfg.seed`, and resolves both training pools.
    pub fn new(
        index: &CorpusIndex,
        labels: &[PseudoLabel],
        mut cfg: AdaptorConfig,
        use_discriminator: bool,
    ) -> Result<Self> {
        let (phonemes, speakers) = vocabularies(index);
        cfg.phoneme_vocab = phonemes.len();
        cfg.speakers = speakers.len();
        let (params, disc) = init_params(&cfg)?;
        let (cat_pool, int_pool) = build_pools(index, labels, &phonemes, &speakers)?;
        Ok(Self {
            cfg,
            params,
            disc,
            use_discriminator,
            phonemes,
            speakers,
            cat_pool,
            int_pool,
            step: 0,
        })
    }

    /// Rebuilds a trainer around checkpointed state. The corpus and labels
    /// must be the ones the checkpoint was trained on for the trajectory to
    /// continue exactly.
    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        cfg: AdaptorConfig,
        params: AdaptorParams,
        disc: DiscriminatorParams,
        phonemes: Vec<String>,
        speakers: Vec<String>,
        step: u64,
        index: &CorpusIndex,
        labels: &[PseudoLabel],
        use_discriminator: bool,
    ) -> Result<Self> {
        if params.phoneme_table.len() != phonemes.len() || params.speaker_table.len() != speakers.len() {
            return Err(Error::Adaptor(
                "checkpoint tables do not match its vocabularies".into(),
            ));
        }
        let (cat_pool, int_pool) = build_pools(index, labels, &phonemes, &speakers)?;
        Ok(Self {
            cfg,
            params,
            disc,
            use_discriminator,
            phonemes,
            speakers,
            cat_pool,
            int_pool,
            step,
        })
    }

    /// Draws the step's batch (uniform with replacement from each pool,
    /// substream = step index) and performs one update.
    pub fn train_step(&mut self) -> Result<LossReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.step.wrapping_add(1));
        let draw = |pool: &[TrainItem], rng: &mut ChaCha8Rng, n: usize| -> Vec<TrainItem> {
            (0..n).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
        };
        let batch = TrainBatch {
            categorical: draw(&self.cat_pool, &mut rng, self.cfg.batch_size),
            intermediate: draw(&self.int_pool, &mut rng, self.cfg.batch_size),
        };
        let disc = if self.use_discriminator {
            Some(&mut self.disc)
        } else {
            None
        };
        let report = train_step(&mut self.params, disc, &batch, &self.cfg, self.step)?;
        self.step += 1;
        Ok(report)
    }

    pub fn params(&self) -> &AdaptorParams {
        &self.params
    }

    pub fn disc(&self) -> &DiscriminatorParams {
        &self.disc
    }

    pub fn config(&self) -> &AdaptorConfig {
        &self.cfg
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn use_discriminator(&self) -> bool {
        self.use_discriminator
    }

    pub fn phoneme_vocab(&self) -> &[String] {
        &self.phonemes
    }

    pub fn speaker_vocab(&self) -> &[String] {
        &self.speakers
    }

    pub fn phoneme_ids(&self, symbols: &[String]) -> Result<Vec<usize>> {
        symbols
            .iter()
            .map(|s| {
                self.phonemes
                    .binary_search(s)
                    .map_err(|_| Error::Adaptor(format!("phoneme {s:?} not in vocabulary")))
            })
            .collect()
    }

    pub fn speaker_id(&self, speaker: &str) -> Result<usize> {
        self.speakers
            .binary_search_by(|s| s.as_str().cmp(speaker))
            .map_err(|_| Error::Adaptor(format!("speaker {speaker:?} not in vocabulary")))
    }

    /// Symbol-level forward pass, for evaluation runs.
    pub fn predict(
        &self,
        symbols: &[String],
        speaker: &str,
        cond: &EmotionCondition,
    ) -> Result<super::Prediction> {
        let ids = self.phoneme_ids(symbols)?;
        super::forward(&self.params, &ids, self.speaker_id(speaker)?, cond)
    }
}

fn vocabularies(index: &CorpusIndex) -> (Vec<String>, Vec<String>) {
    let mut phonemes: Vec<String> = index
        .records()
        .flat_map(|r| r.features.phonemes.iter().cloned())
        .collect();
    phonemes.sort();
    phonemes.dedup();
    let mut speakers: Vec<String> = index.records().map(|r| r.speaker.clone()).collect();
    speakers.sort();
    speakers.dedup();
    (phonemes, speakers)
}

fn build_pools(
    index: &CorpusIndex,
    labels: &[PseudoLabel],
    phonemes: &[String],
    speakers: &[String],
) -> Result<(Vec<TrainItem>, Vec<TrainItem>)> {
    let phoneme_id = |s: &String| -> Result<usize> {
        phonemes
            .binary_search(s)
            .map_err(|_| Error::Adaptor(format!("phoneme {s:?} not in vocabulary")))
    };
    let speaker_id = |s: &str| -> Result<usize> {
        speakers
            .binary_search_by(|v| v.as_str().cmp(s))
            .map_err(|_| Error::Adaptor(format!("speaker {s:?} not in vocabulary")))
    };

    let mut cat_pool = Vec::new();
    for r in index.records() {
        cat_pool.push(TrainItem {
            phoneme_ids: r.features.phonemes.iter().map(&phoneme_id).collect::<Result<_>>()?,
            speaker_id: speaker_id(&r.speaker)?,
            cond: EmotionCondition::pure(r.emotion),
            target_duration: r.features.duration.clone(),
            target_pitch: r.features.pitch.clone(),
            target_energy: r.features.energy.clone(),
        });
    }
    if cat_pool.is_empty() {
        return Err(Error::Adaptor("corpus has no records to train on".into()));
    }

    let mut int_pool = Vec::new();
    for l in labels {
        let neutral = index
            .get(&l.speaker, &l.sentence, EmotionLabel::Neutral)
            .ok_or_else(|| {
                Error::Adaptor(format!(
                    "pseudo-label ({}, {}) has no neutral corpus record to resolve phonemes",
                    l.speaker, l.sentence
                ))
            })?;
        if neutral.features.len() != l.len() {
            return Err(Error::Adaptor(format!(
                "pseudo-label ({}, {}) length {} does not match corpus phonemes {}",
                l.speaker,
                l.sentence,
                l.len(),
                neutral.features.len()
            )));
        }
        int_pool.push(TrainItem {
            phoneme_ids: neutral
                .features
                .phonemes
                .iter()
                .map(&phoneme_id)
                .collect::<Result<_>>()?,
            speaker_id: speaker_id(&l.speaker)?,
            cond: EmotionCondition::new(l.emo_i, l.emo_j, l.lambda)?,
            target_duration: l.duration.clone(),
            target_pitch: l.pitch.clone(),
            target_energy: l.energy.clone(),
        });
    }
    if int_pool.is_empty() {
        return Err(Error::Adaptor("no pseudo-labels to train on".into()));
    }
    Ok((cat_pool, int_pool))
}
