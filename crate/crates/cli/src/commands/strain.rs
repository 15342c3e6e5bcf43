use std::path::PathBuf;

use myoinr_core::strain::{
    case_reports, evaluate_prediction, evaluate_zero_displacement, summarize, CohortSummary,
    SliceEvaluation, StrainReport,
};
use myoinr_core::CaseRecord;
use serde::Serialize;

use super::track::{read_predicted_landmarks, read_predictions};
use crate::cli::StrainArgs;
use crate::config::RunConfig;
use crate::dataset::{case_stem, create_dir, read_case, read_manifest, write_json};
use crate::error::{CliError, CliResult};
use crate::overlay::write_overlay;
use crate::report::{strain_cases_csv, strain_cohort_csv, write_text, StrainRow};

pub const STRAIN_REPORT_FILE: &str = "strain_report.json";
pub const CASES_CSV: &str = "strain_cases.csv";
pub const COHORT_CSV: &str = "strain_cohort.csv";

#[derive(Debug, Clone, Serialize)]
pub struct CaseStrain {
    pub case_id: String,
    pub point_error_mm: f64,
    pub predicted: StrainReport,
    pub reference: StrainReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrainOutcome {
    pub summary: CohortSummary,
    /// The zero-displacement predictor on the same cases.
    pub baseline: CohortSummary,
    pub cases: Vec<CaseStrain>,
    pub slices: Vec<SliceEvaluation>,
    pub overlays: Vec<PathBuf>,
}

pub fn cmd_strain(args: &StrainArgs) -> CliResult<StrainOutcome> {
    if let Some(s) = args.spacing {
        if !(s > 0.0 && s.is_finite()) {
            return Err(CliError::Usage(format!(
                "--spacing must be positive, got {s}"
            )));
        }
    }
    let preds = read_predictions(&args.pred)?;
    let reference = read_manifest(&args.reference)?;
    if preds.cases.is_empty() {
        return Err(CliError::data("prediction set is empty"));
    }

    let mut refs: Vec<CaseRecord> = Vec::with_capacity(preds.cases.len());
    let mut evals = Vec::with_capacity(preds.cases.len());
    let mut predicted_grids = Vec::with_capacity(preds.cases.len());
    for entry in &preds.cases {
        let ref_entry = reference
            .cases
            .iter()
            .find(|e| e.id == entry.id && e.slice_index == entry.slice_index)
            .ok_or_else(|| {
                CliError::data(format!(
                    "no reference for case {} slice {} in {}",
                    entry.id,
                    entry.slice_index,
                    args.reference.display()
                ))
            })?;
        let case = read_case(&args.reference, ref_entry)?;
        let predicted = read_predicted_landmarks(&args.pred, entry)?;
        predicted.same_shape(&case.landmarks)?;
        let spacing = args.spacing.unwrap_or(case.series.pixel_spacing_mm);
        evals.push(evaluate_prediction(
            case.id(),
            case.series.slice_index,
            &predicted,
            &case.landmarks,
            spacing,
        )?);
        predicted_grids.push(predicted);
        refs.push(case);
    }
    let summary = summarize(&evals)?;
    let mut baseline_evals = evaluate_zero_displacement(&refs)?;
    if let Some(s) = args.spacing {
        for e in &mut baseline_evals {
            let f = s / refs
                .iter()
                .find(|c| c.id() == e.case_id)
                .unwrap()
                .series
                .pixel_spacing_mm;
            e.point_error_mm *= f;
            e.squared_error_mm2 *= f * f;
        }
    }
    let baseline = summarize(&baseline_evals)?;

    let mut cases = Vec::new();
    for (pred, reference) in case_reports(&evals)? {
        let slices: Vec<&SliceEvaluation> =
            evals.iter().filter(|e| e.case_id == pred.case_id).collect();
        let sq: f64 = slices.iter().map(|e| e.squared_error_mm2).sum();
        let n: usize = slices.iter().map(|e| e.point_count).sum();
        cases.push(CaseStrain {
            case_id: pred.case_id.clone(),
            point_error_mm: (sq / n as f64).sqrt(),
            predicted: pred,
            reference,
        });
    }

    create_dir(&args.out)?;
    let rows: Vec<StrainRow<'_>> = cases
        .iter()
        .map(|c| StrainRow {
            case_id: &c.case_id,
            point_error_mm: c.point_error_mm,
            predicted: &c.predicted,
            reference: &c.reference,
        })
        .collect();
    write_text(&args.out.join(CASES_CSV), &strain_cases_csv(&rows))?;
    write_text(&args.out.join(COHORT_CSV), &strain_cohort_csv(&summary))?;

    let mut overlays = Vec::new();
    if !args.no_overlays {
        let dir = args.out.join("overlays");
        create_dir(&dir)?;
        for ((case, pred), eval) in refs.iter().zip(&predicted_grids).zip(&evals) {
            let es = eval.end_systole_frame;
            let path = dir.join(format!(
                "{}_es.png",
                case_stem(case.id(), case.series.slice_index)
            ));
            write_overlay(
                &path,
                case.series.frame(es),
                case.landmarks.points(es),
                pred.points(es),
            )?;
            overlays.push(path);
        }
    }
    let outcome = StrainOutcome {
        summary,
        baseline,
        cases,
        slices: evals,
        overlays,
    };
    write_json(&args.out.join(STRAIN_REPORT_FILE), &outcome)?;
    let mut run = RunConfig::new("strain", &args.out, myoinr_core::Precision::F64, 1)
        .option("pred", &args.pred)
        .option("spacing", args.spacing)
        .option("overlays", !args.no_overlays);
    run.dataset = Some(args.reference.clone());
    run.write()?;
    Ok(outcome)
}
