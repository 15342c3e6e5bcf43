//! Inference: landmark tracking and dense displacement fields.
//!
//! The network is a continuous function of position, so dense fields can be
//! sampled on any grid; landmark and dense queries share one evaluation path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::{displacement_to_pixels, normalize_point, normalize_time, Point};
use crate::diffnet::{condition, displace, InrModel};
use crate::landmarks::LandmarkGrid;
use crate::real::Real;
use crate::series::TagFrameSeries;
use crate::{Error, Result};

/// Points evaluated per network call; bounds peak memory on dense queries.
const CHUNK: usize = 4096;

fn check_series<T: Real>(model: &InrModel<T>, series: &TagFrameSeries) -> Result<()> {
    if series.image_size() != model.config().image_size {
        return Err(Error::ShapeMismatch(format!(
            "model expects {0}x{0} frames, series has {1}x{1}",
            model.config().image_size,
            series.image_size()
        )));
    }
    if series.frame_count() < 2 {
        return Err(Error::InvalidArgument("need at least 2 frames".into()));
    }
    Ok(())
}

/// Pixel displacements of `points_px` at frame `frame`.
pub fn displacements_at<T: Real>(
    model: &InrModel<T>,
    series: &TagFrameSeries,
    points_px: &[Point],
    frame: usize,
) -> Result<Vec<Point>> {
    check_series(model, series)?;
    let size = series.image_size();
    let t = normalize_time(frame, series.frame_count())?;
    let cond = condition(model, series.frame(0), series.frame(frame))?;
    let normalized: Vec<Point> = points_px
        .iter()
        .map(|&p| normalize_point(p, size))
        .collect();
    let mut out = Vec::with_capacity(points_px.len());
    for chunk in normalized.chunks(CHUNK) {
        for r in displace(model, &cond, chunk, t, false)? {
            out.push(displacement_to_pixels(r.u, size));
        }
    }
    Ok(out)
}

/// Predicted positions of the reference landmarks in every frame.
///
/// Frame 0 is whatever the network returns at `t = 0`; it is not pinned to
/// the reference.
pub fn track_landmarks<T: Real>(
    model: &InrModel<T>,
    series: &TagFrameSeries,
    reference: &LandmarkGrid,
) -> Result<LandmarkGrid> {
    check_series(model, series)?;
    let base = reference.points(0);
    let frames = (0..series.frame_count())
        .into_par_iter()
        .map(|k| {
            let u = displacements_at(model, series, base, k)?;
            Ok(base
                .iter()
                .zip(u)
                .map(|(p, d)| [p[0] + d[0], p[1] + d[1]])
                .collect())
        })
        .collect::<Result<Vec<Vec<Point>>>>()?;
    LandmarkGrid::new(reference.rings(), reference.spokes(), frames)
}

/// Sample positions of an `R x R` dense grid spanning the image, in pixels.
/// With `R` equal to the image size the samples are exactly the pixel centers.
pub fn dense_grid_coords(resolution: usize, image_size: usize) -> Result<Vec<Point>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let span = (image_size - 1) as f64;
    let denom = (resolution - 1) as f64;
    let axis: Vec<f64> = (0..resolution).map(|i| i as f64 * span / denom).collect();
    Ok(axis
        .iter()
        .flat_map(|&y| axis.iter().map(move |&x| [x, y]))
        .collect())
}

/// Displacements (pixels) sampled on an `R x R` grid for selected frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseField {
    pub resolution: usize,
    pub image_size: usize,
    pub frames: Vec<usize>,
    /// Per frame, `R * R` row-major displacement vectors.
    pub displacements: Vec<Vec<Point>>,
}

pub fn dense_field<T: Real>(
    model: &InrModel<T>,
    series: &TagFrameSeries,
    resolution: usize,
    frames: Option<&[usize]>,
) -> Result<DenseField> {
    check_series(model, series)?;
    let coords = dense_grid_coords(resolution, series.image_size())?;
    let frames: Vec<usize> = match frames {
        Some(f) => f.to_vec(),
        None => (0..series.frame_count()).collect(),
    };
    if let Some(&bad) = frames.iter().find(|&&k| k >= series.frame_count()) {
        return Err(Error::InvalidArgument(format!(
            "frame {bad} out of range for {} frames",
            series.frame_count()
        )));
    }
    let displacements = frames
        .iter()
        .map(|&k| displacements_at(model, series, &coords, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseField {
        resolution,
        image_size: series.image_size(),
        frames,
        displacements,
    })
}
