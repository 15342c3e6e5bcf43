use serde::{Deserialize, Serialize};

use crate::coords::Point;
use crate::landmarks::{GridFrame, LandmarkGrid};
use crate::{Error, Result};

/// `(L_ES - L_ED) / L_ED`.
pub fn local_strain(l_ed: f64, l_es: f64) -> Result<f64> {
    if l_ed.is_nan() || l_ed <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "reference length must be positive, got {l_ed}"
        )));
    }
    Ok((l_es - l_ed) / l_ed)
}

#[inline]
fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Global strain and the local strains it averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStrain {
    pub value: f64,
    pub pairs: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Circumferential strain: every ring, every cyclically adjacent spoke pair.
pub fn gcs(ed: GridFrame<'_>, es: GridFrame<'_>) -> Result<GlobalStrain> {
    ed.same_topology(&es)?;
    let mut pairs = Vec::with_capacity(ed.rings * ed.spokes);
    for j in 0..ed.rings {
        for k in 0..ed.spokes {
            let k1 = (k + 1) % ed.spokes;
            pairs.push(local_strain(
                distance(ed.at(j, k), ed.at(j, k1)),
                distance(es.at(j, k), es.at(j, k1)),
            )?);
        }
    }
    Ok(GlobalStrain {
        value: mean(&pairs),
        pairs,
    })
}

/// Radial strain: every spoke, every adjacent ring pair.
pub fn grs(ed: GridFrame<'_>, es: GridFrame<'_>) -> Result<GlobalStrain> {
    ed.same_topology(&es)?;
    let mut pairs = Vec::with_capacity((ed.rings - 1) * ed.spokes);
    for j in 0..ed.rings - 1 {
        for k in 0..ed.spokes {
            pairs.push(local_strain(
                distance(ed.at(j, k), ed.at(j + 1, k)),
                distance(es.at(j, k), es.at(j + 1, k)),
            )?);
        }
    }
    Ok(GlobalStrain {
        value: mean(&pairs),
        pairs,
    })
}

/// Sum of squared point distances over frames `1..` and their count.
pub(crate) fn squared_error_sum(
    pred: &LandmarkGrid,
    reference: &LandmarkGrid,
) -> Result<(f64, usize)> {
    pred.same_shape(reference)?;
    let mut sum = 0.0;
    let mut count = 0;
    for k in 1..pred.frame_count() {
        for (a, b) in pred.points(k).iter().zip(reference.points(k)) {
            sum += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            count += 1;
        }
    }
    Ok((sum, count))
}

/// RMS Euclidean distance over all points of frames `t > 0`, in millimetres.
pub fn point_rmse(pred: &LandmarkGrid, reference: &LandmarkGrid, spacing_mm: f64) -> Result<f64> {
    let (sum, count) = squared_error_sum(pred, reference)?;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "point error needs at least one frame after the reference".into(),
        ));
    }
    Ok((sum / count as f64).sqrt() * spacing_mm)
}

/// Signed/absolute agreement between predicted and reference strains, in
/// percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub bias: f64,
    pub sd: f64,
    pub error: f64,
    pub n_cases: usize,
}

pub fn agreement(pred: &[f64], reference: &[f64]) -> Result<AgreementStats> {
    if pred.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted vs {} reference strains",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let diffs: Vec<f64> = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * 100.0)
        .collect();
    let n = diffs.len() as f64;
    let bias = diffs.iter().sum::<f64>() / n;
    let sd = if diffs.len() > 1 {
        (diffs.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let error = diffs.iter().map(|d| d.abs()).sum::<f64>() / n;
    Ok(AgreementStats {
        bias,
        sd,
        error,
        n_cases: diffs.len(),
    })
}

/// Frame of smallest innermost-ring circumference; ties go to the lowest
/// index.
pub fn end_systole_index(grid: &LandmarkGrid) -> usize {
    let spokes = grid.spokes();
    let circumference = |k: usize| {
        let f = grid.frame(k);
        (0..spokes)
            .map(|s| distance(f.at(0, s), f.at(0, (s + 1) % spokes)))
            .sum::<f64>()
    };
    let mut best = 0;
    let mut best_c = circumference(0);
    for k in 1..grid.frame_count() {
        let c = circumference(k);
        if c < best_c {
            best = k;
            best_c = c;
        }
    }
    best
}

/// Frame nearest to a known normalized end-systolic time.
pub fn nearest_frame(t_es: f64, frame_count: usize) -> usize {
    ((t_es * (frame_count - 1) as f64).round() as usize).min(frame_count - 1)
}
