//! Lagrangian strain, point error and agreement metrics.

mod ablation;
mod evaluate;
mod metrics;

pub use ablation::{ablation_sweep, ablation_sweep_with, AblationRow, DEFAULT_ALPHAS};
pub use evaluate::{
    aggregate_slices, case_reports, evaluate_model, evaluate_prediction,
    evaluate_zero_displacement, slice_strain, summarize, CohortSummary, SliceEvaluation,
    SliceStrain, StrainReport,
};
pub use metrics::{
    agreement, end_systole_index, gcs, grs, local_strain, nearest_frame, point_rmse,
    AgreementStats, GlobalStrain,
};
