//! Window discriminators and least-squares adversarial losses.
//!
//! Each element (duration, pitch, energy) gets an independent 2-layer
//! network scoring fixed-width sliding windows, mean-pooled over the
//! sequence. The scoring functions are domain-agnostic; the training loop
//! presents duration sequences in log(d + 1) domain (the same domain the
//! duration head predicts in) and pitch/energy sequences through asinh,
//! so the critics never see raw hundreds-of-Hz magnitudes.

use super::net::{Mlp, MlpGrads};
use super::{DiscriminatorParams, DISC_WINDOW};
use crate::error::{Error, Result};

/// Which predicted element a discriminator or loss term refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Duration,
    Pitch,
    Energy,
}

impl Element {
    pub const ALL: [Element; 3] = [Element::Duration, Element::Pitch, Element::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Element::Duration => "duration",
            Element::Pitch => "pitch",
            Element::Energy => "energy",
        }
    }
}

fn element_net(disc: &DiscriminatorParams, element: Element) -> &Mlp {
    match element {
        Element::Duration => &disc.duration,
        Element::Pitch => &disc.pitch,
        Element::Energy => &disc.energy,
    }
}

fn element_net_mut(disc: &mut DiscriminatorParams, element: Element) -> &mut Mlp {
    match element {
        Element::Duration => &mut disc.duration,
        Element::Pitch => &mut disc.pitch,
        Element::Energy => &mut disc.energy,
    }
}

/// Index quadruples of every scored window. Sequences shorter than the
/// window are right-padded by edge replication, yielding one window.
fn window_indices(len: usize) -> Vec<[usize; DISC_WINDOW]> {
    if len >= DISC_WINDOW {
        (0..=len - DISC_WINDOW)
            .map(|t| [t, t + 1, t + 2, t + 3])
            .collect()
    } else {
        let mut w = [0; DISC_WINDOW];
        for (i, slot) in w.iter_mut().enumerate() {
            *slot = i.min(len - 1);
        }
        vec![w]
    }
}

fn score_with(net: &Mlp, seq: &[f64]) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::Adaptor("cannot score an empty sequence".into()));
    }
    let windows = window_indices(seq.len());
    let sum: f64 = windows
        .iter()
        .map(|idx| {
            let w: Vec<f64> = idx.iter().map(|&i| seq[i]).collect();
            net.forward(&w).0
        })
        .sum();
    Ok(sum / windows.len() as f64)
}

/// Mean sliding-window score D(seq) of one element's discriminator.
pub fn discriminator_score(
    disc: &DiscriminatorParams,
    element: Element,
    seq: &[f64],
) -> Result<f64> {
    score_with(element_net(disc, element), seq)
}

/// Accumulates d(dscore * D(seq))/d(net params) into `grads`.
fn backward_params(net: &Mlp, seq: &[f64], dscore: f64, grads: &mut MlpGrads) {
    let windows = window_indices(seq.len());
    let per_window = dscore / windows.len() as f64;
    for idx in &windows {
        let w: Vec<f64> = idx.iter().map(|&i| seq[i]).collect();
        let (_, u) = net.forward(&w);
        grads.backward(net, &w, &u, per_window);
    }
}

/// d(dscore * D(seq))/d(seq), honoring the replication padding.
pub(crate) fn backward_input(net: &Mlp, seq: &[f64], dscore: f64) -> Vec<f64> {
    let windows = window_indices(seq.len());
    let per_window = dscore / windows.len() as f64;
    let mut dseq = vec![0.0; seq.len()];
    let mut scratch = MlpGrads::zeros_like(net);
    for idx in &windows {
        let w: Vec<f64> = idx.iter().map(|&i| seq[i]).collect();
        let (_, u) = net.forward(&w);
        let dw = scratch.backward(net, &w, &u, per_window);
        for (&i, &g) in idx.iter().zip(&dw) {
            dseq[i] += g;
        }
    }
    dseq
}

/// Least-squares GAN losses for one element:
/// disc_loss = E[(D(real) - 1)^2] + E[D(fake)^2],
/// gen_loss  = E[(D(fake) - 1)^2],
/// with expectations as means over the given sets.
pub fn loss_adversarial(
    disc: &DiscriminatorParams,
    element: Element,
    real_seqs: &[Vec<f64>],
    fake_seqs: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if real_seqs.is_empty() || fake_seqs.is_empty() {
        return Err(Error::Adaptor(format!(
            "{} adversarial loss needs non-empty real and fake sets",
            element.name()
        )));
    }
    let net = element_net(disc, element);
    let mut real_term = 0.0;
    for r in real_seqs {
        let d = score_with(net, r)?;
        real_term += (d - 1.0) * (d - 1.0);
    }
    real_term /= real_seqs.len() as f64;

    let mut fake_sq = 0.0;
    let mut gen = 0.0;
    for f in fake_seqs {
        let d = score_with(net, f)?;
        fake_sq += d * d;
        gen += (d - 1.0) * (d - 1.0);
    }
    fake_sq /= fake_seqs.len() as f64;
    gen /= fake_seqs.len() as f64;

    Ok((real_term + fake_sq, gen))
}

/// Gradient of one element's disc_loss with respect to that element's
/// network. Fake sequences are constants here: nothing flows back to the
/// generator.
pub(crate) fn disc_loss_gradient(
    disc: &DiscriminatorParams,
    element: Element,
    real_seqs: &[Vec<f64>],
    fake_seqs: &[Vec<f64>],
) -> Result<MlpGrads> {
    let net = element_net(disc, element);
    let mut grads = MlpGrads::zeros_like(net);
    for r in real_seqs {
        let d = score_with(net, r)?;
        backward_params(net, r, 2.0 * (d - 1.0) / real_seqs.len() as f64, &mut grads);
    }
    for f in fake_seqs {
        let d = score_with(net, f)?;
        backward_params(net, f, 2.0 * d / fake_seqs.len() as f64, &mut grads);
    }
    Ok(grads)
}

/// Gradient of one element's generator-side loss E[(D(fake) - 1)^2] with
/// respect to the discriminator network (used by the whole-objective
/// gradient check).
pub(crate) fn gen_loss_gradient_wrt_disc(
    disc: &DiscriminatorParams,
    element: Element,
    fake_seqs: &[Vec<f64>],
) -> Result<MlpGrads> {
    let net = element_net(disc, element);
    let mut grads = MlpGrads::zeros_like(net);
    for f in fake_seqs {
        let d = score_with(net, f)?;
        backward_params(net, f, 2.0 * (d - 1.0) / fake_seqs.len() as f64, &mut grads);
    }
    Ok(grads)
}

/// d(gen_loss)/d(fake sequence) for one fake, with the 1/N over the fake
/// set already included.
pub(crate) fn gen_loss_gradient_wrt_fake(
    disc: &DiscriminatorParams,
    element: Element,
    fake: &[f64],
    n_fakes: usize,
) -> Result<Vec<f64>> {
    let net = element_net(disc, element);
    let d = score_with(net, fake)?;
    Ok(backward_input(net, fake, 2.0 * (d - 1.0) / n_fakes as f64))
}

/// One plain gradient-descent update of a single element's discriminator.
/// Returns the pre-update (disc_loss, gen_loss) pair.
pub fn discriminator_step(
    disc: &mut DiscriminatorParams,
    element: Element,
    real_seqs: &[Vec<f64>],
    fake_seqs: &[Vec<f64>],
    lr: f64,
) -> Result<(f64, f64)> {
    let losses = loss_adversarial(disc, element, real_seqs, fake_seqs)?;
    let grads = disc_loss_gradient(disc, element, real_seqs, fake_seqs)?;
    element_net_mut(disc, element).apply_gradient(&grads, lr);
    Ok(losses)
}
