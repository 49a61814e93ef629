//! Adaptor training: batches, loss trajectory, checkpointing.

use super::{ensure_output_dir, load_corpus, Ctx, Outcome};
use crate::TrainArgs;
use anyhow::{Context, Result};
use imix_core::adaptor::{LossReport, Trainer};
use imix_core::error::Error as CoreError;
use imix_core::io::{self, Checkpoint};
use std::fmt::Write as _;

pub fn run(ctx: &Ctx, args: &TrainArgs) -> Result<Outcome> {
    let index = load_corpus(&args.manifest)?;
    let labels = io::read_pseudo_labels(&args.labels)
        .with_context(|| format!("cannot read pseudo-labels {}", args.labels.display()))?;
    ensure_output_dir(ctx)?;

    let steps = args.steps_short.unwrap_or(ctx.config.train_steps);
    let mut trainer = match &args.resume {
        Some(path) => {
            let cp = io::read_checkpoint(path)
                .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
            let use_disc = cp.use_discriminator && !args.no_discriminator;
            Trainer::resume(
                cp.config, cp.params, cp.disc, cp.phonemes, cp.speakers, cp.step, &index, &labels,
                use_disc,
            )?
        }
        None => {
            ctx.config.check_adaptor()?;
            let use_disc = ctx.config.use_discriminator && !args.no_discriminator;
            Trainer::new(&index, &labels, ctx.config.adaptor.clone(), use_disc)?
        }
    };

    let mut reports: Vec<(u64, LossReport)> = Vec::with_capacity(steps as usize);
    let mut diverged: Option<CoreError> = None;
    for _ in 0..steps {
        let step = trainer.step();
        match trainer.train_step() {
            Ok(report) => reports.push((step, report)),
            Err(e) => {
                diverged = Some(e);
                break;
            }
        }
    }

    io::write_loss_csv(&reports, &ctx.out_path("loss.csv"))?;

    if let Some(e) = diverged {
        if let CoreError::Divergence { step, term, value } = &e {
            let mut report = String::from("# training divergence report\n");
            writeln!(report, "step\t{step}").expect("string write");
            writeln!(report, "term\t{term}").expect("string write");
            writeln!(report, "value\t{value}").expect("string write");
            writeln!(report, "completed_steps\t{}", reports.len()).expect("string write");
            io::write_atomic(&ctx.out_path("divergence.tsv"), report.as_bytes())?;
        }
        return Err(anyhow::Error::new(e).context("training diverged; partial loss.csv written"));
    }

    let checkpoint = Checkpoint {
        config: trainer.config().clone(),
        phonemes: trainer.phoneme_vocab().to_vec(),
        speakers: trainer.speaker_vocab().to_vec(),
        step: trainer.step(),
        use_discriminator: trainer.use_discriminator(),
        params: trainer.params().clone(),
        disc: trainer.disc().clone(),
    };
    io::write_checkpoint(&checkpoint, &ctx.out_path("checkpoint.imxc"))?;

    match reports.last() {
        Some((step, r)) => println!(
            "trained {} step(s) to step {}; final L_total {:.6} -> checkpoint.imxc, loss.csv",
            reports.len(),
            step + 1,
            r.l_total
        ),
        None => println!("wrote initialization checkpoint (0 steps)"),
    }
    Ok(Outcome::Full)
}
