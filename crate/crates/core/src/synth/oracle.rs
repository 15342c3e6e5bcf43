//! Chord strains evaluated directly on the analytic map.

use serde::{Deserialize, Serialize};

use super::deformation::{deform_point, AnalyticDeformation};
use crate::coords::{normalize_point, Point};
use crate::landmarks::GridFrame;
use crate::Result;

/// Per-pair local strains. Circumferential pair `(ring j, spokes k, k+1 mod
/// N_c)` sits at index `j N_c + k`; radial pair `(rings j, j+1, spoke k)` at
/// `j N_c + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticStrain {
    pub circumferential: Vec<f64>,
    pub radial: Vec<f64>,
}

impl AnalyticStrain {
    pub fn gcs(&self) -> f64 {
        self.circumferential.iter().sum::<f64>() / self.circumferential.len() as f64
    }

    pub fn grs(&self) -> f64 {
        self.radial.iter().sum::<f64>() / self.radial.len() as f64
    }
}

fn chord(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Strains between the reference grid (pixel units) and its image under
/// `def` at time `t`.
pub fn analytic_strain(
    def: &AnalyticDeformation,
    grid: GridFrame<'_>,
    image_size: usize,
    t: f64,
) -> Result<AnalyticStrain> {
    let before: Vec<Point> = grid
        .points
        .iter()
        .map(|&p| normalize_point(p, image_size))
        .collect();
    let after = before
        .iter()
        .map(|&p| deform_point(def, p, t))
        .collect::<Result<Vec<Point>>>()?;
    let (nr, nc) = (grid.rings, grid.spokes);
    let idx = |j: usize, k: usize| j * nc + k;
    let strain = |a: usize, b: usize| {
        let l0 = chord(before[a], before[b]);
        (chord(after[a], after[b]) - l0) / l0
    };
    let mut circumferential = Vec::with_capacity(nr * nc);
    for j in 0..nr {
        for k in 0..nc {
            circumferential.push(strain(idx(j, k), idx(j, (k + 1) % nc)));
        }
    }
    let mut radial = Vec::with_capacity((nr - 1) * nc);
    for j in 0..nr - 1 {
        for k in 0..nc {
            radial.push(strain(idx(j, k), idx(j + 1, k)));
        }
    }
    Ok(AnalyticStrain {
        circumferential,
        radial,
    })
}
