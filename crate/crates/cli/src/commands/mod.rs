mod ablate;
mod gradcheck;
mod strain;
mod synth;
mod track;
mod train;

pub use ablate::{cmd_ablate, AblateOutcome};
pub use gradcheck::cmd_gradcheck;
pub use strain::{cmd_strain, StrainOutcome, STRAIN_REPORT_FILE};
pub use synth::cmd_synth;
pub use track::{
    cmd_track, read_predictions, PredictionEntry, PredictionManifest, PREDICTIONS_FILE,
};
pub use train::{cmd_train, TrainOutcome, FINAL_CHECKPOINT, METRICS_FILE};

use crate::cli::Command;
use crate::error::CliResult;

/// Runs one parsed command, printing a short summary to stdout.
pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => {
            let m = cmd_synth(&a)?;
            println!("wrote {} cases to {}", m.cases.len(), a.out.display());
        }
        Command::Train(a) => {
            let o = cmd_train(&a)?;
            if let Some(last) = o.history.last() {
                println!(
                    "epoch {}: l_pos {:.6e} l_jac {:.6e} l_z {:.6e} total {:.6e}",
                    last.epoch, last.pos, last.jac, last.latent, last.total
                );
            }
            println!("checkpoint {}", o.checkpoint.display());
        }
        Command::Track(a) => {
            let m = cmd_track(&a)?;
            println!("tracked {} slices into {}", m.cases.len(), a.out.display());
        }
        Command::Strain(a) => {
            let o = cmd_strain(&a)?;
            let s = &o.summary;
            println!(
                "cases {} point error {:.3} mm | GCS {:.2}% bias {:.2} error {:.2} | GRS {:.2}% bias {:.2} error {:.2}",
                s.n_cases,
                s.point_error_mm,
                100.0 * s.gcs,
                s.gcs_agreement.bias,
                s.gcs_agreement.error,
                100.0 * s.grs,
                s.grs_agreement.bias,
                s.grs_agreement.error
            );
        }
        Command::Gradcheck(a) => {
            cmd_gradcheck(&a)?;
        }
        Command::Ablate(a) => {
            let o = cmd_ablate(&a)?;
            print!("{}", crate::report::ablation_csv(&o.rows));
        }
    }
    Ok(())
}
