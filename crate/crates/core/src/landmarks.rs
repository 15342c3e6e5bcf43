//! Structured ring x spoke landmark grids.
//!
//! Point index `p = ring * spokes + spoke`. Rings run from the endocardium
//! outwards, spokes run counter-clockwise and close cyclically.

use serde::{Deserialize, Serialize};

use crate::coords::Point;
use crate::{Error, Result};

pub const DEFAULT_RINGS: usize = 7;
pub const DEFAULT_SPOKES: usize = 24;
/// Landmarks per frame of a conformant grid.
pub const LANDMARK_COUNT: usize = DEFAULT_RINGS * DEFAULT_SPOKES;

/// Landmark positions for every frame of a series, in pixel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkGrid {
    rings: usize,
    spokes: usize,
    frames: Vec<Vec<Point>>,
}

/// Borrowed single-frame view of a grid.
#[derive(Debug, Clone, Copy)]
pub struct GridFrame<'a> {
    pub rings: usize,
    pub spokes: usize,
    pub points: &'a [Point],
}

impl<'a> GridFrame<'a> {
    pub fn new(rings: usize, spokes: usize, points: &'a [Point]) -> Result<Self> {
        check_topology(rings, spokes)?;
        if points.len() != rings * spokes {
            return Err(Error::ShapeMismatch(format!(
                "{} points for a {rings}x{spokes} grid",
                points.len()
            )));
        }
        Ok(Self {
            rings,
            spokes,
            points,
        })
    }

    #[inline]
    pub fn at(&self, ring: usize, spoke: usize) -> Point {
        self.points[ring * self.spokes + spoke]
    }

    pub fn same_topology(&self, other: &GridFrame<'_>) -> Result<()> {
        if self.rings != other.rings || self.spokes != other.spokes {
            return Err(Error::TopologyMismatch {
                expected_rings: self.rings,
                expected_spokes: self.spokes,
                rings: other.rings,
                spokes: other.spokes,
            });
        }
        Ok(())
    }
}

fn check_topology(rings: usize, spokes: usize) -> Result<()> {
    if rings < 2 || spokes < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 rings and 3 spokes, got {rings}x{spokes}"
        )));
    }
    Ok(())
}

impl LandmarkGrid {
    pub fn new(rings: usize, spokes: usize, frames: Vec<Vec<Point>>) -> Result<Self> {
        check_topology(rings, spokes)?;
        if frames.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = rings * spokes;
        for (k, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "frame {k} has {} points, expected {rings}x{spokes} = {n}",
                    f.len()
                )));
            }
        }
        Ok(Self {
            rings,
            spokes,
            frames,
        })
    }

    /// Builds a grid from a flat frame-major, point-major coordinate buffer.
    pub fn from_flat(
        rings: usize,
        spokes: usize,
        frame_count: usize,
        flat: &[f64],
    ) -> Result<Self> {
        let n = rings * spokes;
        if flat.len() != frame_count * n * 2 {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {frame_count} frames of {n} points",
                flat.len()
            )));
        }
        let frames = flat
            .chunks_exact(n * 2)
            .map(|f| f.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
            .collect();
        Self::new(rings, spokes, frames)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.frames
            .iter()
            .flat_map(|f| f.iter().flat_map(|p| [p[0], p[1]]))
            .collect()
    }

    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn spokes(&self) -> usize {
        self.spokes
    }

    pub fn points_per_frame(&self) -> usize {
        self.rings * self.spokes
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Vec<Point>] {
        &self.frames
    }

    pub fn points(&self, frame: usize) -> &[Point] {
        &self.frames[frame]
    }

    pub fn frame(&self, frame: usize) -> GridFrame<'_> {
        GridFrame {
            rings: self.rings,
            spokes: self.spokes,
            points: &self.frames[frame],
        }
    }

    /// A grid with frame 0 of `self` repeated `frame_count` times.
    pub fn repeat_reference(&self, frame_count: usize) -> Self {
        Self {
            rings: self.rings,
            spokes: self.spokes,
            frames: vec![self.frames[0].clone(); frame_count],
        }
    }

    pub fn push_frame(&mut self, points: Vec<Point>) -> Result<()> {
        if points.len() != self.points_per_frame() {
            return Err(Error::ShapeMismatch(format!(
                "frame has {} points, expected {}",
                points.len(),
                self.points_per_frame()
            )));
        }
        self.frames.push(points);
        Ok(())
    }

    pub fn map_points(&self, mut f: impl FnMut(Point) -> Point) -> Self {
        Self {
            rings: self.rings,
            spokes: self.spokes,
            frames: self
                .frames
                .iter()
                .map(|fr| fr.iter().map(|&p| f(p)).collect())
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &LandmarkGrid) -> Result<()> {
        self.frame(0).same_topology(&other.frame(0))?;
        if self.frame_count() != other.frame_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} frames vs {} frames",
                self.frame_count(),
                other.frame_count()
            )));
        }
        Ok(())
    }
}

/// Single-frame polar grid: point `(ring j, spoke k)` sits at
/// `center + rho_j (cos theta_k, sin theta_k)` with `rho` evenly spaced from
/// `r_endo` to `r_epi` and `theta_k = 2 pi k / spokes`.
pub fn make_landmark_grid(
    center: Point,
    r_endo: f64,
    r_epi: f64,
    rings: usize,
    spokes: usize,
) -> Result<LandmarkGrid> {
    if !(r_endo > 0.0 && r_endo < r_epi) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r_endo < r_epi, got r_endo={r_endo}, r_epi={r_epi}"
        )));
    }
    check_topology(rings, spokes)?;
    let mut points = Vec::with_capacity(rings * spokes);
    for j in 0..rings {
        let rho = r_endo + (r_epi - r_endo) * j as f64 / (rings - 1) as f64;
        for k in 0..spokes {
            let theta = std::f64::consts::TAU * k as f64 / spokes as f64;
            points.push([center[0] + rho * theta.cos(), center[1] + rho * theta.sin()]);
        }
    }
    LandmarkGrid::new(rings, spokes, vec![points])
}
