use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_model, summarize, CohortSummary};
use crate::diffnet::InrModel;
use crate::objective::{train, EpochLoss, LossWeights, TrainConfig};
use crate::real::Real;
use crate::series::CaseRecord;
use crate::{Error, Result};

/// Jacobian weights of the reference sweep.
pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.001, 0.005, 0.01, 0.1];

/// One row of the Jacobian-weight ablation table. Strain columns are percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub point_error: f64,
    pub gcs_bias: f64,
    pub gcs_error: f64,
    pub grs_bias: f64,
    pub grs_error: f64,
}

impl AblationRow {
    pub fn from_summary(alpha: f64, s: &CohortSummary) -> Self {
        Self {
            alpha,
            point_error: s.point_error_mm,
            gcs_bias: s.gcs_agreement.bias,
            gcs_error: s.gcs_agreement.error,
            grs_bias: s.grs_agreement.bias,
            grs_error: s.grs_agreement.error,
        }
    }
}

/// Trains one model per `alpha` (same seed, data and order) and evaluates
/// each on `eval_set`. `visit` sees every trained model.
pub fn ablation_sweep_with<T: Real>(
    train_set: &[CaseRecord],
    eval_set: &[CaseRecord],
    alphas: &[f64],
    config: &TrainConfig,
    mut visit: impl FnMut(f64, &InrModel<T>, &[EpochLoss], &CohortSummary),
) -> Result<Vec<AblationRow>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one alpha is required".into(),
        ));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut cfg = config.clone();
        cfg.weights = LossWeights::new(alpha, config.weights.beta)?;
        let (model, history) = train::<T>(train_set, &cfg)?;
        let summary = summarize(&evaluate_model(&model, eval_set)?)?;
        visit(alpha, &model, &history, &summary);
        rows.push(AblationRow::from_summary(alpha, &summary));
    }
    Ok(rows)
}

pub fn ablation_sweep<T: Real>(
    train_set: &[CaseRecord],
    eval_set: &[CaseRecord],
    alphas: &[f64],
    config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    ablation_sweep_with::<T>(train_set, eval_set, alphas, config, |_, _, _, _| {})
}
