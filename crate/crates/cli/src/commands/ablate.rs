use std::path::PathBuf;

use myoinr_core::objective::with_workers;
use myoinr_core::strain::{ablation_sweep_with, AblationRow};
use myoinr_core::{CaseRecord, Precision, Real, TrainConfig};

use crate::checkpoint::save_checkpoint;
use crate::cli::AblateArgs;
use crate::config::RunConfig;
use crate::dataset::{create_dir, read_dataset};
use crate::error::{CliError, CliResult};
use crate::report::{ablation_csv, write_text};

pub const ABLATION_CSV: &str = "ablation.csv";

#[derive(Debug, Clone)]
pub struct AblateOutcome {
    pub rows: Vec<AblationRow>,
    pub models: Vec<PathBuf>,
}

pub fn model_file_name(alpha: f64) -> String {
    format!("alpha_{alpha}.ckpt")
}

fn sweep<T: Real>(
    train: &[CaseRecord],
    eval: &[CaseRecord],
    config: &TrainConfig,
    args: &AblateArgs,
) -> CliResult<AblateOutcome> {
    let mut models = Vec::new();
    let mut save_error = None;
    let rows = ablation_sweep_with::<T>(
        train,
        eval,
        &args.alphas,
        config,
        |alpha, model, _, summary| {
            eprintln!(
                "alpha {alpha}: point error {:.3} mm, GCS error {:.2}, GRS bias {:.2}",
                summary.point_error_mm, summary.gcs_agreement.error, summary.grs_agreement.bias
            );
            if args.save_models && save_error.is_none() {
                let path = args.out.join(model_file_name(alpha));
                match save_checkpoint(&path, model, None) {
                    Ok(()) => models.push(path),
                    Err(e) => save_error = Some(e),
                }
            }
        },
    )?;
    if let Some(e) = save_error {
        return Err(e);
    }
    Ok(AblateOutcome { rows, models })
}

pub fn cmd_ablate(args: &AblateArgs) -> CliResult<AblateOutcome> {
    if args.alphas.is_empty() {
        return Err(CliError::Usage("--alphas needs at least one value".into()));
    }
    if args.train.alpha.is_some() {
        return Err(CliError::Usage("ablate sets alpha per run; use --alphas".into()));
    }
    if let Some(a) = args.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(CliError::Usage(format!(
            "alpha must be nonnegative, got {a}"
        )));
    }
    let config = args.train.apply(TrainConfig::default())?;
    let (_, train) = read_dataset(&args.data)?;
    let eval = match &args.eval {
        Some(dir) => read_dataset(dir)?.1,
        None => train.clone(),
    };
    create_dir(&args.out)?;
    let mut run = RunConfig::new("ablate", &args.out, args.exec.precision, args.exec.workers)
        .option("alphas", &args.alphas)
        .option("eval", &args.eval)
        .option("save_models", args.save_models);
    run.dataset = Some(args.data.clone());
    run.train = Some(config.clone());
    run.write()?;
    let outcome = with_workers(args.exec.workers, || match args.exec.precision {
        Precision::F32 => sweep::<f32>(&train, &eval, &config, args),
        Precision::F64 => sweep::<f64>(&train, &eval, &config, args),
    })??;
    write_text(&args.out.join(ABLATION_CSV), &ablation_csv(&outcome.rows))?;
    Ok(outcome)
}
