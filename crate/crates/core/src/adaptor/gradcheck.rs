//! Finite-difference verification of the handwritten gradients.

use super::disc::{disc_loss_gradient, gen_loss_gradient_wrt_disc, Element};
use super::net::MlpGrads;
use super::train::{evaluate, fake_seqs, generator_gradients, real_seqs, TrainBatch};
use super::{AdaptorParams, DiscriminatorParams};
use crate::error::{Error, Result};

/// Parameter budget above which the quadratic-cost check refuses to run.
const MAX_CHECK_PARAMS: usize = 2_000;

fn push_table(t: &[Vec<f64>], out: &mut Vec<f64>) {
    for row in t {
        out.extend_from_slice(row);
    }
}

fn read_table(t: &mut [Vec<f64>], it: &mut impl Iterator<Item = f64>) -> Option<()> {
    for row in t {
        for v in row.iter_mut() {
            *v = it.next()?;
        }
    }
    Some(())
}

fn push_mlp_grads(g: &MlpGrads, out: &mut Vec<f64>) {
    for row in &g.w1 {
        out.extend_from_slice(row);
    }
    out.extend_from_slice(&g.b1);
    out.extend_from_slice(&g.w2);
    out.push(g.b2);
}

/// Tables row-major (phoneme, speaker, emotion), then the three heads in
/// duration/pitch/energy order, each as w1 rows, b1, w2, b2.
pub(crate) fn flatten_params(p: &AdaptorParams) -> Vec<f64> {
    let mut out = Vec::new();
    push_table(&p.phoneme_table, &mut out);
    push_table(&p.speaker_table, &mut out);
    push_table(&p.emotion_table, &mut out);
    p.duration_head.push_params(&mut out);
    p.pitch_head.push_params(&mut out);
    p.energy_head.push_params(&mut out);
    out
}

pub(crate) fn assign_params(p: &mut AdaptorParams, values: &[f64]) -> Result<()> {
    let mut it = values.iter().copied();
    let filled = (|| {
        read_table(&mut p.phoneme_table, &mut it)?;
        read_table(&mut p.speaker_table, &mut it)?;
        read_table(&mut p.emotion_table, &mut it)?;
        p.duration_head.read_params(&mut it)?;
        p.pitch_head.read_params(&mut it)?;
        p.energy_head.read_params(&mut it)
    })();
    if filled.is_none() || it.next().is_some() {
        return Err(Error::Adaptor(
            "parameter vector length does not match model shape".into(),
        ));
    }
    Ok(())
}

/// Discriminator nets in duration/pitch/energy order.
pub(crate) fn flatten_disc(d: &DiscriminatorParams) -> Vec<f64> {
    let mut out = Vec::new();
    d.duration.push_params(&mut out);
    d.pitch.push_params(&mut out);
    d.energy.push_params(&mut out);
    out
}

pub(crate) fn assign_disc(d: &mut DiscriminatorParams, values: &[f64]) -> Result<()> {
    let mut it = values.iter().copied();
    let filled = (|| {
        d.duration.read_params(&mut it)?;
        d.pitch.read_params(&mut it)?;
        d.energy.read_params(&mut it)
    })();
    if filled.is_none() || it.next().is_some() {
        return Err(Error::Adaptor(
            "parameter vector length does not match discriminator shape".into(),
        ));
    }
    Ok(())
}

fn finite_total(params: &AdaptorParams, disc: Option<&DiscriminatorParams>, batch: &TrainBatch) -> Result<f64> {
    let (report, _) = evaluate(params, disc, batch)?;
    if !report.l_total.is_finite() {
        return Err(Error::Adaptor(format!(
            "non-finite total loss {} during gradient check",
            report.l_total
        )));
    }
    Ok(report.l_total)
}

/// Analytic gradient of the total loss with respect to every parameter,
/// flattened as adaptor parameters followed by discriminator parameters
/// (when present). The discriminator block holds the generator-side
/// adversarial loss's dependence on the critic weights — that is the part
/// of the total loss they appear in.
pub(crate) fn analytic_gradient(
    params: &AdaptorParams,
    disc: Option<&DiscriminatorParams>,
    batch: &TrainBatch,
) -> Result<Vec<f64>> {
    let (_, caches) = evaluate(params, disc, batch)?;
    let g = generator_gradients(params, disc, batch, &caches)?;

    let mut out = Vec::new();
    push_table(&g.phoneme_table, &mut out);
    push_table(&g.speaker_table, &mut out);
    push_table(&g.emotion_table, &mut out);
    push_mlp_grads(&g.duration_head, &mut out);
    push_mlp_grads(&g.pitch_head, &mut out);
    push_mlp_grads(&g.energy_head, &mut out);

    if let Some(disc) = disc {
        for element in Element::ALL {
            let fakes = fake_seqs(&caches.intermediate, element);
            let dg = gen_loss_gradient_wrt_disc(disc, element, &fakes)?;
            push_mlp_grads(&dg, &mut out);
        }
    }
    Ok(out)
}

fn numeric_gradient(
    params: &AdaptorParams,
    disc: Option<&DiscriminatorParams>,
    batch: &TrainBatch,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let base_params = flatten_params(params);
    let base_disc = disc.map(flatten_disc);
    let n = base_params.len() + base_disc.as_ref().map_or(0, Vec::len);

    let mut scratch_params = params.clone();
    let mut scratch_disc = disc.cloned();
    let mut eval_at = |perturbed: &[f64]| -> Result<f64> {
        assign_params(&mut scratch_params, &perturbed[..base_params.len()])?;
        if let Some(d) = scratch_disc.as_mut() {
            assign_disc(d, &perturbed[base_params.len()..])?;
        }
        finite_total(&scratch_params, scratch_disc.as_ref(), batch)
    };

    let mut flat: Vec<f64> = base_params.iter().chain(base_disc.iter().flatten()).copied().collect();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let orig = flat[i];
        flat[i] = orig + epsilon;
        let plus = eval_at(&flat)?;
        flat[i] = orig - epsilon;
        let minus = eval_at(&flat)?;
        flat[i] = orig;
        grad[i] = (plus - minus) / (2.0 * epsilon);
    }
    Ok(grad)
}

pub(crate) fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / f64::max(1e-8, a.abs() + n.abs()))
        .fold(0.0, f64::max)
}

/// Compares the analytic gradient of the total loss against central finite
/// differences, parameter by parameter, and returns the worst relative
/// error. Quadratic in parameter count — small configurations only.
pub fn gradient_check(
    params: &AdaptorParams,
    disc: Option<&DiscriminatorParams>,
    batch: &TrainBatch,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Adaptor(format!("epsilon {epsilon} must be positive")));
    }
    let n = flatten_params(params).len() + disc.map_or(0, |d| flatten_disc(d).len());
    if n > MAX_CHECK_PARAMS {
        return Err(Error::Adaptor(format!(
            "{n} parameters exceed the gradient-check budget of {MAX_CHECK_PARAMS}"
        )));
    }
    let analytic = analytic_gradient(params, disc, batch)?;
    let numeric = numeric_gradient(params, disc, batch, epsilon)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Same check for the discriminators' own objective (the loss their update
/// descends, with fakes held constant at the current predictions).
pub fn gradient_check_discriminator(
    params: &AdaptorParams,
    disc: &DiscriminatorParams,
    batch: &TrainBatch,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Adaptor(format!("epsilon {epsilon} must be positive")));
    }
    let n = flatten_disc(disc).len();
    if n > MAX_CHECK_PARAMS {
        return Err(Error::Adaptor(format!(
            "{n} parameters exceed the gradient-check budget of {MAX_CHECK_PARAMS}"
        )));
    }
    let (_, caches) = evaluate(params, Some(disc), batch)?;
    let reals: Vec<Vec<Vec<f64>>> = Element::ALL
        .iter()
        .map(|&e| real_seqs(&batch.categorical, e))
        .collect();
    let fakes: Vec<Vec<Vec<f64>>> = Element::ALL
        .iter()
        .map(|&e| fake_seqs(&caches.intermediate, e))
        .collect();

    let mut analytic = Vec::new();
    for (k, element) in Element::ALL.into_iter().enumerate() {
        let g = disc_loss_gradient(disc, element, &reals[k], &fakes[k])?;
        push_mlp_grads(&g, &mut analytic);
    }

    let objective = |d: &DiscriminatorParams| -> Result<f64> {
        let mut total = 0.0;
        for (k, element) in Element::ALL.into_iter().enumerate() {
            let (disc_loss, _) = super::disc::loss_adversarial(d, element, &reals[k], &fakes[k])?;
            if !disc_loss.is_finite() {
                return Err(Error::Adaptor(
                    "non-finite discriminator loss during gradient check".into(),
                ));
            }
            total += disc_loss;
        }
        Ok(total)
    };

    let mut flat = flatten_disc(disc);
    let mut scratch = disc.clone();
    let mut numeric = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + epsilon;
        assign_disc(&mut scratch, &flat)?;
        let plus = objective(&scratch)?;
        flat[i] = orig - epsilon;
        assign_disc(&mut scratch, &flat)?;
        let minus = objective(&scratch)?;
        flat[i] = orig;
        numeric[i] = (plus - minus) / (2.0 * epsilon);
    }
    assign_disc(&mut scratch, &flat)?;
    Ok(max_relative_error(&analytic, &numeric))
}
