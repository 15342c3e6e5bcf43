use std::path::{Path, PathBuf};

use myoinr_core::objective::{with_workers, EpochLoss, Trainer};
use myoinr_core::{CaseRecord, Precision, Real, TrainConfig};

use crate::checkpoint::{
    load_checkpoint, save_checkpoint, AnyCheckpoint, Checkpoint, TrainingState,
};
use crate::cli::TrainArgs;
use crate::config::RunConfig;
use crate::dataset::{create_dir, read_dataset};
use crate::error::{CliError, CliResult};
use crate::report::{metrics_csv, write_text};

pub const FINAL_CHECKPOINT: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub history: Vec<EpochLoss>,
    pub config: TrainConfig,
}

pub fn epoch_checkpoint_name(epoch: usize) -> String {
    format!("checkpoint_epoch_{epoch:03}.ckpt")
}

fn training_state<T: Real>(trainer: &Trainer<'_, T>) -> TrainingState<T> {
    TrainingState {
        epoch: trainer.epoch(),
        config: trainer.config().clone(),
        history: trainer.history().to_vec(),
        optimizer: trainer.optimizer().clone(),
    }
}

fn run_training<T: Real>(
    cases: &[CaseRecord],
    config: TrainConfig,
    resume: Option<Checkpoint<T>>,
    out: &Path,
    every: usize,
) -> CliResult<TrainOutcome> {
    let mut trainer = match resume {
        None => Trainer::<T>::new(cases, config)?,
        Some(ckpt) => {
            let state = ckpt.training.ok_or_else(|| {
                CliError::data("checkpoint has no optimizer state to resume from")
            })?;
            Trainer::resume(
                cases,
                config,
                ckpt.model,
                Some(state.optimizer),
                state.epoch,
                state.history,
            )?
        }
    };
    while trainer.epoch() < trainer.config().epochs {
        let loss = trainer.run_epoch()?;
        eprintln!(
            "epoch {}: l_pos {:.6e} l_jac {:.6e} l_z {:.6e} total {:.6e}",
            loss.epoch, loss.pos, loss.jac, loss.latent, loss.total
        );
        write_text(&out.join(METRICS_FILE), &metrics_csv(trainer.history()))?;
        if every > 0 && trainer.epoch() % every == 0 {
            let state = training_state(&trainer);
            save_checkpoint(
                &out.join(epoch_checkpoint_name(trainer.epoch())),
                trainer.model(),
                Some(&state),
            )?;
        }
    }
    write_text(&out.join(METRICS_FILE), &metrics_csv(trainer.history()))?;
    let state = training_state(&trainer);
    let checkpoint = out.join(FINAL_CHECKPOINT);
    save_checkpoint(&checkpoint, trainer.model(), Some(&state))?;
    Ok(TrainOutcome {
        checkpoint,
        history: state.history,
        config: state.config,
    })
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<TrainOutcome> {
    let resume = args.resume.as_deref().map(load_checkpoint).transpose()?;
    let precision = resume
        .as_ref()
        .map_or(args.exec.precision, AnyCheckpoint::precision);
    let base = match &resume {
        Some(AnyCheckpoint::F32(c)) => c.training.as_ref().map(|t| t.config.clone()),
        Some(AnyCheckpoint::F64(c)) => c.training.as_ref().map(|t| t.config.clone()),
        None => None,
    };
    let config = args.train.apply(base.unwrap_or_default())?;
    let (_, cases) = read_dataset(&args.data)?;
    create_dir(&args.out)?;
    let mut run = RunConfig::new("train", &args.out, precision, args.exec.workers);
    run.dataset = Some(args.data.clone());
    run.checkpoint_every = Some(args.checkpoint_every);
    run.train = Some(config.clone());
    if let Some(r) = &args.resume {
        run = run.option("resume", r);
    }
    run.write()?;

    let (out, every) = (args.out.as_path(), args.checkpoint_every);
    with_workers(args.exec.workers, || match (precision, resume) {
        (Precision::F32, None) => run_training::<f32>(&cases, config, None, out, every),
        (Precision::F64, None) => run_training::<f64>(&cases, config, None, out, every),
        (_, Some(AnyCheckpoint::F32(c))) => run_training(&cases, config, Some(c), out, every),
        (_, Some(AnyCheckpoint::F64(c))) => run_training(&cases, config, Some(c), out, every),
    })?
}
