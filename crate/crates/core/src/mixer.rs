//! The speech mixer: samples neutral/emotional utterance pairs from a
//! parallel corpus, draws interpolation weights, and blends phoneme-level
//! features into intermediate-intensity pseudo-labels.
//!
//! Convention used everywhere: `lambda` weights the FIRST argument, i.e.
//! mixed = lambda * a + (1 - lambda) * b, with durations floored.

use crate::align::PhonemeFeatures;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// The five categorical emotions of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Happy,
    Sad,
    Angry,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 5] = [
        EmotionLabel::Neutral,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Angry,
        EmotionLabel::Surprise,
    ];

    pub fn is_neutral(self) -> bool {
        self == EmotionLabel::Neutral
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(EmotionLabel::Neutral),
            "happy" => Ok(EmotionLabel::Happy),
            "sad" => Ok(EmotionLabel::Sad),
            "angry" => Ok(EmotionLabel::Angry),
            "surprise" => Ok(EmotionLabel::Surprise),
            other => Err(Error::Corpus(format!("unknown emotion label {other:?}"))),
        }
    }
}

/// One utterance's phoneme-level features plus its corpus coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub speaker: String,
    pub sentence: String,
    pub emotion: EmotionLabel,
    pub features: PhonemeFeatures,
}

/// Key type for corpus lookups: (speaker, sentence, emotion).
pub type UtteranceKey = (String, String, EmotionLabel);

/// A parallel emotional corpus: every non-neutral utterance must have a
/// neutral rendition of the same sentence by the same speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    records: BTreeMap<UtteranceKey, UtteranceRecord>,
}

impl CorpusIndex {
    pub fn new(records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            let key = (r.speaker.clone(), r.sentence.clone(), r.emotion);
            if map.contains_key(&key) {
                return Err(Error::Corpus(format!(
                    "duplicate record for ({}, {}, {})",
                    key.0, key.1, key.2
                )));
            }
            map.insert(key, r);
        }
        let index = Self { records: map };
        index.check_parallel()?;
        Ok(index)
    }

    fn check_parallel(&self) -> Result<()> {
        for (speaker, sentence, emotion) in self.records.keys() {
            if !emotion.is_neutral() {
                let neutral = (speaker.clone(), sentence.clone(), EmotionLabel::Neutral);
                if !self.records.contains_key(&neutral) {
                    return Err(Error::Corpus(format!(
                        "({speaker}, {sentence}, {emotion}) has no neutral counterpart"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, speaker: &str, sentence: &str, emotion: EmotionLabel) -> Option<&UtteranceRecord> {
        self.records
            .get(&(speaker.to_string(), sentence.to_string(), emotion))
    }

    /// Records in deterministic (sorted-key) order.
    pub fn records(&self) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Non-neutral records, each of which pairs with its sentence's neutral
    /// rendition. Sorted-key order, so sampling by index is deterministic.
    fn candidates(&self) -> Vec<&UtteranceRecord> {
        self.records
            .values()
            .filter(|r| !r.emotion.is_neutral())
            .collect()
    }
}

/// Distribution the interpolation weight is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaDistribution {
    /// Beta(0.5, 0.5): mass piles at the endpoints.
    Beta,
    /// Uniform on [0, 1].
    Uniform,
    /// Equal probability on {0, 0.5, 1.0}.
    Discrete,
}

impl fmt::Display for LambdaDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LambdaDistribution::Beta => "beta",
            LambdaDistribution::Uniform => "uniform",
            LambdaDistribution::Discrete => "discrete",
        };
        f.write_str(s)
    }
}

impl FromStr for LambdaDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(LambdaDistribution::Beta),
            "uniform" => Ok(LambdaDistribution::Uniform),
            "discrete" => Ok(LambdaDistribution::Discrete),
            other => Err(Error::Mix(format!(
                "unknown lambda distribution {other:?} (expected beta, uniform, or discrete)"
            ))),
        }
    }
}

/// Draws an interpolation weight in [0, 1].
///
/// Beta(0.5, 0.5) uses the exact inverse CDF sin^2(pi * u / 2), avoiding
/// rejection sampling so the draw count per record is fixed.
pub fn sample_lambda(dist: LambdaDistribution, rng: &mut impl Rng) -> f64 {
    match dist {
        LambdaDistribution::Beta => {
            let u: f64 = rng.gen();
            let s = (std::f64::consts::PI * u / 2.0).sin();
            s * s
        }
        LambdaDistribution::Uniform => rng.gen(),
        LambdaDistribution::Discrete => [0.0, 0.5, 1.0][rng.gen_range(0..3)],
    }
}

/// Samples a parallel (same speaker, same sentence) utterance pair with
/// exactly one neutral side; the neutral side comes first or second with
/// probability 1/2.
pub fn sample_pair<'a>(
    index: &'a CorpusIndex,
    rng: &mut impl Rng,
) -> Result<(&'a UtteranceRecord, &'a UtteranceRecord)> {
    let candidates = index.candidates();
    if candidates.is_empty() {
        return Err(Error::Corpus(
            "no eligible pair: index has no non-neutral records".into(),
        ));
    }
    let emo = candidates[rng.gen_range(0..candidates.len())];
    let neutral = index
        .get(&emo.speaker, &emo.sentence, EmotionLabel::Neutral)
        .expect("parallel invariant guarantees a neutral counterpart");
    if rng.gen_bool(0.5) {
        Ok((neutral, emo))
    } else {
        Ok((emo, neutral))
    }
}

/// Elementwise mix of two feature sequences. Always contains the mixed
/// value within the closed interval spanned by the sources.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedFeatures {
    pub pitch: Vec<f64>,
    pub duration: Vec<u32>,
    pub energy: Vec<f64>,
}

/// lambda * a + (1 - lambda) * b, evaluated so that the endpoints are exact
/// and the result is clamped into [min(a,b), max(a,b)] against rounding.
fn mix_value(a: f64, b: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        return a;
    }
    if lambda == 0.0 || a == b {
        return b;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (b + lambda * (a - b)).clamp(lo, hi)
}

/// Blends two phoneme-parallel feature sequences; `lambda` weights `a`.
/// Durations are floored back to integers after mixing.
pub fn mix(a: &PhonemeFeatures, b: &PhonemeFeatures, lambda: f64) -> Result<MixedFeatures> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Mix(format!("lambda {lambda} outside [0, 1]")));
    }
    if a.phonemes != b.phonemes {
        return Err(Error::Mix(format!(
            "phoneme sequences differ ({} vs {} symbols)",
            a.phonemes.len(),
            b.phonemes.len()
        )));
    }
    let pitch = a
        .pitch
        .iter()
        .zip(&b.pitch)
        .map(|(&x, &y)| mix_value(x, y, lambda))
        .collect();
    let energy = a
        .energy
        .iter()
        .zip(&b.energy)
        .map(|(&x, &y)| mix_value(x, y, lambda))
        .collect();
    let duration = a
        .duration
        .iter()
        .zip(&b.duration)
        .map(|(&x, &y)| mix_value(x as f64, y as f64, lambda).floor() as u32)
        .collect();
    Ok(MixedFeatures {
        pitch,
        duration,
        energy,
    })
}

/// A mixed utterance: the emotion pair it interpolates, the weight, and
/// the blended sequences. `lambda` weights `emo_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub speaker: String,
    pub sentence: String,
    pub emo_i: EmotionLabel,
    pub emo_j: EmotionLabel,
    pub lambda: f64,
    pub pitch: Vec<f64>,
    pub duration: Vec<u32>,
    pub energy: Vec<f64>,
}

impl PseudoLabel {
    pub fn new(
        speaker: String,
        sentence: String,
        emo_i: EmotionLabel,
        emo_j: EmotionLabel,
        lambda: f64,
        mixed: MixedFeatures,
    ) -> Result<Self> {
        if emo_i.is_neutral() == emo_j.is_neutral() {
            return Err(Error::Mix(format!(
                "exactly one side must be neutral, got ({emo_i}, {emo_j})"
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Mix(format!("lambda {lambda} outside [0, 1]")));
        }
        let n = mixed.pitch.len();
        if mixed.duration.len() != n || mixed.energy.len() != n || n == 0 {
            return Err(Error::Mix(format!(
                "mixed sequences must share a non-zero length, got {}/{}/{}",
                n,
                mixed.duration.len(),
                mixed.energy.len()
            )));
        }
        Ok(Self {
            speaker,
            sentence,
            emo_i,
            emo_j,
            lambda,
            pitch: mixed.pitch,
            duration: mixed.duration,
            energy: mixed.energy,
        })
    }

    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }
}

/// One pair excluded from mixing, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipEntry {
    pub speaker: String,
    pub sentence: String,
    pub emotion: EmotionLabel,
    pub detail: String,
}

/// Pairs that could not be mixed (phoneme sequences disagree with the
/// neutral rendition), listed once per distinct pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkipReport {
    pub entries: Vec<SkipEntry>,
}

impl SkipReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Generates `count` pseudo-labels from the parallel corpus.
///
/// Candidate pairs whose phoneme sequences disagree with their neutral
/// rendition are set aside into the skip report up front; sampling then
/// draws uniformly from the remaining mixable pairs. Record `k` uses an
/// independent substream of the seed, so results do not depend on
/// evaluation order.
pub fn generate_pseudo_dataset(
    index: &CorpusIndex,
    count: usize,
    dist: LambdaDistribution,
    seed: u64,
) -> Result<(Vec<PseudoLabel>, SkipReport)> {
    if count == 0 {
        return Err(Error::Mix("count must be >= 1".into()));
    }
    let candidates = index.candidates();
    if candidates.is_empty() {
        return Err(Error::Corpus(
            "no eligible pair: index has no non-neutral records".into(),
        ));
    }

    let mut mixable = Vec::new();
    let mut report = SkipReport::default();
    for emo in candidates {
        let neutral = index
            .get(&emo.speaker, &emo.sentence, EmotionLabel::Neutral)
            .expect("parallel invariant guarantees a neutral counterpart");
        if emo.features.phonemes == neutral.features.phonemes {
            mixable.push((emo, neutral));
        } else {
            report.entries.push(SkipEntry {
                speaker: emo.speaker.clone(),
                sentence: emo.sentence.clone(),
                emotion: emo.emotion,
                detail: format!(
                    "phoneme sequence differs from neutral ({} vs {} symbols)",
                    emo.features.phonemes.len(),
                    neutral.features.phonemes.len()
                ),
            });
        }
    }
    if mixable.is_empty() {
        return Err(Error::Mix(
            "no mixable pairs: every candidate disagrees with its neutral phonemes".into(),
        ));
    }

    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);

        let (emo, neutral) = mixable[rng.gen_range(0..mixable.len())];
        let (first, second) = if rng.gen_bool(0.5) {
            (neutral, emo)
        } else {
            (emo, neutral)
        };
        let lambda = sample_lambda(dist, &mut rng);
        let mixed = mix(&first.features, &second.features, lambda)?;
        out.push(PseudoLabel::new(
            first.speaker.clone(),
            first.sentence.clone(),
            first.emotion,
            second.emotion,
            lambda,
            mixed,
        )?);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feats(pitch: Vec<f64>, duration: Vec<u32>, energy: Vec<f64>) -> PhonemeFeatures {
        let n = pitch.len();
        let symbols = (0..n).map(|i| format!("P{i}")).collect();
        PhonemeFeatures::new(symbols, pitch, duration, energy).unwrap()
    }

    fn record(speaker: &str, sentence: &str, emotion: EmotionLabel, scale: f64) -> UtteranceRecord {
        UtteranceRecord {
            speaker: speaker.into(),
            sentence: sentence.into(),
            emotion,
            features: feats(
                vec![100.0 * scale, 150.0 * scale, 120.0 * scale],
                vec![3, 5, 4],
                vec![1.0 * scale, 2.0 * scale, 1.5 * scale],
            ),
        }
    }

    #[test]
    fn emotion_labels_round_trip_as_text() {
        for e in EmotionLabel::ALL {
            assert_eq!(e.to_string().parse::<EmotionLabel>().unwrap(), e);
        }
        assert!("joyful".parse::<EmotionLabel>().is_err());
        assert!("Neutral".parse::<EmotionLabel>().is_err());
    }

    #[test]
    fn corpus_requires_neutral_counterpart() {
        let only_happy = vec![record("s1", "u1", EmotionLabel::Happy, 1.0)];
        assert!(matches!(CorpusIndex::new(only_happy), Err(Error::Corpus(_))));

        let paired = vec![
            record("s1", "u1", EmotionLabel::Neutral, 1.0),
            record("s1", "u1", EmotionLabel::Happy, 1.2),
        ];
        assert!(CorpusIndex::new(paired).is_ok());
    }

    #[test]
    fn corpus_rejects_duplicates() {
        let dup = vec![
            record("s1", "u1", EmotionLabel::Neutral, 1.0),
            record("s1", "u1", EmotionLabel::Neutral, 1.1),
        ];
        assert!(CorpusIndex::new(dup).is_err());
    }

    #[test]
    fn single_candidate_pair_is_always_sampled_in_both_orders() {
        let index = CorpusIndex::new(vec![
            record("s1", "u1", EmotionLabel::Neutral, 1.0),
            record("s1", "u1", EmotionLabel::Happy, 1.2),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut saw_neutral_first = false;
        let mut saw_neutral_second = false;
        for _ in 0..50 {
            let (a, b) = sample_pair(&index, &mut rng).unwrap();
            assert_eq!(a.speaker, b.speaker);
            assert_eq!(a.sentence, b.sentence);
            assert!(a.emotion.is_neutral() != b.emotion.is_neutral());
            if a.emotion.is_neutral() {
                saw_neutral_first = true;
            } else {
                saw_neutral_second = true;
            }
        }
        assert!(saw_neutral_first && saw_neutral_second);
    }

    #[test]
    fn neutral_only_corpus_cannot_be_paired() {
        let index = CorpusIndex::new(vec![record("s1", "u1", EmotionLabel::Neutral, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_pair(&index, &mut rng).is_err());
    }

    #[test]
    fn sampled_emotions_are_near_uniform() {
        let mut records = vec![record("s1", "u1", EmotionLabel::Neutral, 1.0)];
        for e in [
            EmotionLabel::Happy,
            EmotionLabel::Sad,
            EmotionLabel::Angry,
            EmotionLabel::Surprise,
        ] {
            records.push(record("s1", "u1", e, 1.1));
        }
        let index = CorpusIndex::new(records).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = BTreeMap::new();
        let mut neutral_first = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let (a, b) = sample_pair(&index, &mut rng).unwrap();
            let emo = if a.emotion.is_neutral() { b.emotion } else { a.emotion };
            *counts.entry(emo).or_insert(0usize) += 1;
            if a.emotion.is_neutral() {
                neutral_first += 1;
            }
        }
        for (&emo, &c) in &counts {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - 0.25).abs() <= 0.03,
                "{emo}: frequency {freq} outside 25% +- 3 points"
            );
        }
        let flip = neutral_first as f64 / n as f64;
        assert!((flip - 0.5).abs() <= 0.03, "neutral-first rate {flip}");
    }

    #[test]
    fn discrete_lambda_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let l = sample_lambda(LambdaDistribution::Discrete, &mut rng);
            assert!(l == 0.0 || l == 0.5 || l == 1.0);
        }
    }

    #[test]
    fn beta_lambda_tail_mass_matches_arcsine_law() {
        // P(l < 0.1) + P(l > 0.9) for Beta(0.5, 0.5) is 2 * (2/pi) *
        // asin(sqrt(0.1)) = 0.4097.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let tails = (0..n)
            .map(|_| sample_lambda(LambdaDistribution::Beta, &mut rng))
            .filter(|&l| l < 0.1 || l > 0.9)
            .count();
        let frac = tails as f64 / n as f64;
        assert!((frac - 0.41).abs() <= 0.03, "tail mass {frac}");
    }

    #[test]
    fn uniform_lambda_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_lambda(LambdaDistribution::Uniform, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let below = draws.iter().filter(|&&l| l < 0.5).count() as f64 / n as f64;
        assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
        assert!((below - 0.5).abs() <= 0.02, "P(l < 0.5) = {below}");
        assert!(draws.iter().all(|&l| (0.0..=1.0).contains(&l)));
    }

    #[test]
    fn beta_lambda_matches_arcsine_cdf_in_kolmogorov_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_lambda(LambdaDistribution::Beta, &mut rng))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cdf = |x: f64| 2.0 / std::f64::consts::PI * x.sqrt().asin();
        let mut d = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        assert!(d < 0.02, "Kolmogorov distance {d}");
    }

    #[test]
    fn lambda_one_returns_first_argument_exactly() {
        let a = feats(vec![200.0, 180.5], vec![3, 7], vec![1.25, 0.5]);
        let b = feats(vec![100.0, 90.25], vec![6, 2], vec![0.75, 1.5]);
        let m = mix(&a, &b, 1.0).unwrap();
        assert_eq!(m.pitch, a.pitch);
        assert_eq!(m.duration, a.duration);
        assert_eq!(m.energy, a.energy);
        let m0 = mix(&a, &b, 0.0).unwrap();
        assert_eq!(m0.pitch, b.pitch);
        assert_eq!(m0.duration, b.duration);
        assert_eq!(m0.energy, b.energy);
    }

    #[test]
    fn midpoint_duration_floors() {
        let a = feats(vec![100.0], vec![3], vec![1.0]);
        let b = feats(vec![100.0], vec![6], vec![1.0]);
        // 0.5 * 3 + 0.5 * 6 = 4.5, floor = 4.
        assert_eq!(mix(&a, &b, 0.5).unwrap().duration, vec![4]);
    }

    #[test]
    fn quarter_weight_pitch_hand_value() {
        let a = feats(vec![200.0], vec![1], vec![1.0]);
        let b = feats(vec![100.0], vec![1], vec![1.0]);
        // 0.25 * 200 + 0.75 * 100 = 125.
        let m = mix(&a, &b, 0.25).unwrap();
        assert!((m.pitch[0] - 125.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_sequences_are_rejected() {
        let a = feats(vec![100.0, 120.0], vec![1, 2], vec![1.0, 1.0]);
        let b = feats(vec![100.0], vec![1], vec![1.0]);
        assert!(mix(&a, &b, 0.5).is_err());

        let mut c = a.clone();
        c.phonemes[1] = "XX".into();
        assert!(mix(&a, &c, 0.5).is_err());
        assert!(mix(&a, &a, 1.5).is_err());
    }

    #[test]
    fn pseudo_label_requires_one_neutral_side() {
        let mixed = MixedFeatures {
            pitch: vec![1.0],
            duration: vec![1],
            energy: vec![1.0],
        };
        assert!(PseudoLabel::new(
            "s".into(),
            "u".into(),
            EmotionLabel::Happy,
            EmotionLabel::Sad,
            0.5,
            mixed.clone(),
        )
        .is_err());
        assert!(PseudoLabel::new(
            "s".into(),
            "u".into(),
            EmotionLabel::Happy,
            EmotionLabel::Neutral,
            0.5,
            mixed,
        )
        .is_ok());
    }

    fn toy_index() -> CorpusIndex {
        CorpusIndex::new(vec![
            record("s1", "u1", EmotionLabel::Neutral, 1.0),
            record("s1", "u1", EmotionLabel::Happy, 1.3),
            record("s1", "u2", EmotionLabel::Neutral, 0.9),
            record("s1", "u2", EmotionLabel::Sad, 0.7),
            record("s2", "u1", EmotionLabel::Neutral, 1.1),
            record("s2", "u1", EmotionLabel::Angry, 1.5),
        ])
        .unwrap()
    }

    #[test]
    fn dataset_generation_is_bit_deterministic() {
        let index = toy_index();
        let (a, skips_a) = generate_pseudo_dataset(&index, 5, LambdaDistribution::Beta, 42).unwrap();
        let (b, skips_b) = generate_pseudo_dataset(&index, 5, LambdaDistribution::Beta, 42).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, b);
        assert_eq!(skips_a, skips_b);
        assert!(skips_a.is_empty());

        let (c, _) = generate_pseudo_dataset(&index, 5, LambdaDistribution::Beta, 43).unwrap();
        assert_ne!(a, c, "different seeds should give different draws");
    }

    #[test]
    fn prefix_stability_under_larger_count() {
        // Substreams per record mean the first k records do not depend on
        // the requested count.
        let index = toy_index();
        let (five, _) = generate_pseudo_dataset(&index, 5, LambdaDistribution::Beta, 9).unwrap();
        let (ten, _) = generate_pseudo_dataset(&index, 10, LambdaDistribution::Beta, 9).unwrap();
        assert_eq!(&ten[..5], &five[..]);
    }

    #[test]
    fn mismatched_phoneme_pairs_go_to_skip_report() {
        let mut bad = record("s1", "u3", EmotionLabel::Surprise, 1.2);
        bad.features = feats(vec![100.0, 110.0], vec![2, 2], vec![1.0, 1.0]);
        let index = CorpusIndex::new(vec![
            record("s1", "u1", EmotionLabel::Neutral, 1.0),
            record("s1", "u1", EmotionLabel::Happy, 1.3),
            record("s1", "u3", EmotionLabel::Neutral, 1.0),
            bad,
        ])
        .unwrap();

        let (labels, skips) = generate_pseudo_dataset(&index, 20, LambdaDistribution::Uniform, 1).unwrap();
        assert_eq!(labels.len(), 20);
        assert_eq!(skips.len(), 1);
        assert_eq!(skips.entries[0].sentence, "u3");
        assert_eq!(skips.entries[0].emotion, EmotionLabel::Surprise);
        assert!(labels.iter().all(|l| l.sentence != "u3"));
    }

    #[test]
    fn all_pairs_unmixable_is_an_error() {
        let mut bad = record("s1", "u1", EmotionLabel::Happy, 1.2);
        bad.features = feats(vec![100.0, 110.0], vec![2, 2], vec![1.0, 1.0]);
        let index = CorpusIndex::new(vec![record("s1", "u1", EmotionLabel::Neutral, 1.0), bad]).unwrap();
        assert!(generate_pseudo_dataset(&index, 3, LambdaDistribution::Beta, 0).is_err());
    }

    #[test]
    fn discrete_dataset_emits_only_grid_lambdas() {
        let index = toy_index();
        let (labels, _) = generate_pseudo_dataset(&index, 50, LambdaDistribution::Discrete, 11).unwrap();
        for l in &labels {
            assert!(l.lambda == 0.0 || l.lambda == 0.5 || l.lambda == 1.0);
            assert!(l.emo_i.is_neutral() != l.emo_j.is_neutral());
        }
    }

    fn bounded_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..600.0, n..=n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn mix_endpoints_and_bounds(
            ap in bounded_vec(4), bp in bounded_vec(4),
            ad in proptest::collection::vec(0u32..40, 4),
            bd in proptest::collection::vec(0u32..40, 4),
            lambda in 0.0f64..=1.0,
        ) {
            let a = feats(ap.clone(), ad.clone(), ap.clone());
            let b = feats(bp.clone(), bd.clone(), bp.clone());
            let m = mix(&a, &b, lambda).unwrap();
            for k in 0..4 {
                let (lo, hi) = (ap[k].min(bp[k]), ap[k].max(bp[k]));
                prop_assert!(m.pitch[k] >= lo && m.pitch[k] <= hi);
                let (dlo, dhi) = (ad[k].min(bd[k]), ad[k].max(bd[k]));
                prop_assert!(m.duration[k] >= dlo && m.duration[k] <= dhi);
                // Affine exactness for the continuous features.
                let affine = lambda * ap[k] + (1.0 - lambda) * bp[k];
                prop_assert!((m.pitch[k] - affine).abs() <= 1e-12);
            }
            // Self-mix is the identity.
            let own = mix(&a, &a, lambda).unwrap();
            prop_assert_eq!(own.pitch, a.pitch);
            prop_assert_eq!(own.duration, a.duration);
            prop_assert_eq!(own.energy, a.energy);
        }

        #[test]
        fn mix_is_monotone_in_lambda(
            ap in bounded_vec(3), bp in bounded_vec(3),
            l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0,
        ) {
            let (l1, l2) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let a = feats(ap.clone(), vec![1, 1, 1], ap.clone());
            let b = feats(bp.clone(), vec![1, 1, 1], bp.clone());
            let m1 = mix(&a, &b, l1).unwrap();
            let m2 = mix(&a, &b, l2).unwrap();
            for k in 0..3 {
                if ap[k] >= bp[k] {
                    prop_assert!(m1.pitch[k] <= m2.pitch[k]);
                } else {
                    prop_assert!(m1.pitch[k] >= m2.pitch[k]);
                }
            }
        }
    }
}
