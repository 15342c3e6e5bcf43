use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{agreement, end_systole_index, gcs, grs, squared_error_sum, AgreementStats};
use crate::diffnet::InrModel;
use crate::landmarks::{GridFrame, LandmarkGrid};
use crate::real::Real;
use crate::series::CaseRecord;
use crate::track::track_landmarks;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceStrain {
    pub slice_index: u8,
    pub gcs: f64,
    pub grs: f64,
    pub per_pair_circ: Vec<f64>,
    pub per_pair_rad: Vec<f64>,
    pub end_systole_frame: usize,
}

pub fn slice_strain(
    ed: GridFrame<'_>,
    es: GridFrame<'_>,
    slice_index: u8,
    end_systole_frame: usize,
) -> Result<SliceStrain> {
    let c = gcs(ed, es)?;
    let r = grs(ed, es)?;
    Ok(SliceStrain {
        slice_index,
        gcs: c.value,
        grs: r.value,
        per_pair_circ: c.pairs,
        per_pair_rad: r.pairs,
        end_systole_frame,
    })
}

/// Case-level strains: unweighted mean over slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainReport {
    pub case_id: String,
    pub gcs: f64,
    pub grs: f64,
    pub per_pair_circ: Vec<f64>,
    pub per_pair_rad: Vec<f64>,
    pub end_systole_frame: usize,
    pub slices: Vec<SliceStrain>,
}

pub fn aggregate_slices(case_id: &str, slices: Vec<SliceStrain>) -> Result<StrainReport> {
    let Some(first) = slices.first() else {
        return Err(Error::EmptyInput);
    };
    if slices.iter().any(|s| {
        s.per_pair_circ.len() != first.per_pair_circ.len()
            || s.per_pair_rad.len() != first.per_pair_rad.len()
    }) {
        return Err(Error::ShapeMismatch(format!(
            "slices of case {case_id} have different grid topologies"
        )));
    }
    let n = slices.len() as f64;
    Ok(StrainReport {
        case_id: case_id.to_string(),
        gcs: slices.iter().map(|s| s.gcs).sum::<f64>() / n,
        grs: slices.iter().map(|s| s.grs).sum::<f64>() / n,
        per_pair_circ: slices
            .iter()
            .flat_map(|s| s.per_pair_circ.iter().copied())
            .collect(),
        per_pair_rad: slices
            .iter()
            .flat_map(|s| s.per_pair_rad.iter().copied())
            .collect(),
        end_systole_frame: first.end_systole_frame,
        slices,
    })
}

/// Predicted vs reference tracking of one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEvaluation {
    pub case_id: String,
    pub slice_index: u8,
    pub point_error_mm: f64,
    pub squared_error_mm2: f64,
    pub point_count: usize,
    pub end_systole_frame: usize,
    pub predicted: SliceStrain,
    pub reference: SliceStrain,
}

/// Compares a predicted grid with the reference. Both strains use the
/// reference end-diastolic landmarks as `L_ED` and the reference ES frame.
pub fn evaluate_prediction(
    case_id: &str,
    slice_index: u8,
    predicted: &LandmarkGrid,
    reference: &LandmarkGrid,
    spacing_mm: f64,
) -> Result<SliceEvaluation> {
    let (sum, count) = squared_error_sum(predicted, reference)?;
    if count == 0 {
        return Err(Error::InvalidArgument("need at least 2 frames".into()));
    }
    let es = end_systole_index(reference);
    let ed = reference.frame(0);
    let sq = sum * spacing_mm * spacing_mm;
    Ok(SliceEvaluation {
        case_id: case_id.to_string(),
        slice_index,
        point_error_mm: (sq / count as f64).sqrt(),
        squared_error_mm2: sq,
        point_count: count,
        end_systole_frame: es,
        predicted: slice_strain(ed, predicted.frame(es), slice_index, es)?,
        reference: slice_strain(ed, reference.frame(es), slice_index, es)?,
    })
}

/// Tracks and evaluates every case.
pub fn evaluate_model<T: Real>(
    model: &InrModel<T>,
    cases: &[CaseRecord],
) -> Result<Vec<SliceEvaluation>> {
    cases
        .par_iter()
        .map(|case| {
            let predicted = track_landmarks(model, &case.series, &case.landmarks)?;
            evaluate_prediction(
                case.id(),
                case.series.slice_index,
                &predicted,
                &case.landmarks,
                case.series.pixel_spacing_mm,
            )
        })
        .collect()
}

/// Evaluation of the zero-displacement predictor.
pub fn evaluate_zero_displacement(cases: &[CaseRecord]) -> Result<Vec<SliceEvaluation>> {
    cases
        .iter()
        .map(|case| {
            let still = case
                .landmarks
                .repeat_reference(case.landmarks.frame_count());
            evaluate_prediction(
                case.id(),
                case.series.slice_index,
                &still,
                &case.landmarks,
                case.series.pixel_spacing_mm,
            )
        })
        .collect()
}

/// Per-case predicted and reference strain reports.
pub fn case_reports(evals: &[SliceEvaluation]) -> Result<Vec<(StrainReport, StrainReport)>> {
    let mut ids: Vec<&str> = Vec::new();
    for e in evals {
        if !ids.contains(&e.case_id.as_str()) {
            ids.push(&e.case_id);
        }
    }
    ids.into_iter()
        .map(|id| {
            let slices: Vec<&SliceEvaluation> = evals.iter().filter(|e| e.case_id == id).collect();
            let pred = aggregate_slices(id, slices.iter().map(|e| e.predicted.clone()).collect())?;
            let reference =
                aggregate_slices(id, slices.iter().map(|e| e.reference.clone()).collect())?;
            Ok((pred, reference))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_cases: usize,
    /// Pooled RMS point error over every slice, frame and point.
    pub point_error_mm: f64,
    pub gcs: f64,
    pub grs: f64,
    pub gcs_reference: f64,
    pub grs_reference: f64,
    pub gcs_agreement: AgreementStats,
    pub grs_agreement: AgreementStats,
}

pub fn summarize(evals: &[SliceEvaluation]) -> Result<CohortSummary> {
    if evals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let reports = case_reports(evals)?;
    let n = reports.len() as f64;
    let pred_gcs: Vec<f64> = reports.iter().map(|(p, _)| p.gcs).collect();
    let ref_gcs: Vec<f64> = reports.iter().map(|(_, r)| r.gcs).collect();
    let pred_grs: Vec<f64> = reports.iter().map(|(p, _)| p.grs).collect();
    let ref_grs: Vec<f64> = reports.iter().map(|(_, r)| r.grs).collect();
    let sq: f64 = evals.iter().map(|e| e.squared_error_mm2).sum();
    let count: usize = evals.iter().map(|e| e.point_count).sum();
    Ok(CohortSummary {
        n_cases: reports.len(),
        point_error_mm: (sq / count as f64).sqrt(),
        gcs: pred_gcs.iter().sum::<f64>() / n,
        grs: pred_grs.iter().sum::<f64>() / n,
        gcs_reference: ref_gcs.iter().sum::<f64>() / n,
        grs_reference: ref_grs.iter().sum::<f64>() / n,
        gcs_agreement: agreement(&pred_gcs, &ref_gcs)?,
        grs_agreement: agreement(&pred_grs, &ref_grs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::make_landmark_grid;

    fn slice(idx: u8, g: f64, r: f64) -> SliceStrain {
        SliceStrain {
            slice_index: idx,
            gcs: g,
            grs: r,
            per_pair_circ: vec![g; 4],
            per_pair_rad: vec![r; 2],
            end_systole_frame: 3,
        }
    }

    #[test]
    fn slices_aggregate_by_unweighted_mean() {
        let rep = aggregate_slices(
            "c",
            vec![
                slice(0, -0.2, 0.1),
                slice(1, -0.1, 0.3),
                slice(2, -0.3, 0.2),
            ],
        )
        .unwrap();
        assert!((rep.gcs + 0.2).abs() < 1e-15);
        assert!((rep.grs - 0.2).abs() < 1e-15);
        let mean_pairs = rep.per_pair_circ.iter().sum::<f64>() / rep.per_pair_circ.len() as f64;
        assert!((mean_pairs - rep.gcs).abs() < 1e-15);
        assert!(aggregate_slices("c", vec![]).is_err());
    }

    #[test]
    fn perfect_prediction_has_zero_error() {
        let base = make_landmark_grid([64.0, 64.0], 15.0, 28.0, 7, 24).unwrap();
        let mut frames = base.frames().to_vec();
        for k in 1..5 {
            let s = 1.0 - 0.04 * k as f64;
            frames.push(
                base.points(0)
                    .iter()
                    .map(|p| [64.0 + s * (p[0] - 64.0), 64.0 + s * (p[1] - 64.0)])
                    .collect(),
            );
        }
        let grid = LandmarkGrid::new(7, 24, frames).unwrap();
        let e = evaluate_prediction("a", 0, &grid, &grid, 1.25).unwrap();
        assert_eq!(e.point_error_mm, 0.0);
        assert_eq!(e.end_systole_frame, 4);
        assert_eq!(e.predicted, e.reference);
        let s = summarize(&[e]).unwrap();
        assert_eq!(s.gcs_agreement.error, 0.0);
        assert!((s.gcs + 0.16).abs() < 1e-12);
    }
}
