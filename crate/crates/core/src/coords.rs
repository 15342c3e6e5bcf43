//! Pixel <-> normalized coordinate conventions.
//!
//! Pixel index `0` maps to `-1` and `size - 1` maps to `+1`. Frame index `k`
//! of an `F`-frame series maps to `k / (F - 1)`, so end-diastole sits at
//! `t = 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in pixel units, `[x, y]` with `x` along columns.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoord {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl NormalizedCoord {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn xy(&self) -> Point {
        [self.x, self.y]
    }
}

fn check_size(image_size: usize) -> Result<()> {
    if image_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "image size must be at least 2, got {image_size}"
        )));
    }
    Ok(())
}

/// Half-extent of the image in pixels; the normalized scale factor.
#[inline]
pub fn half_extent(image_size: usize) -> f64 {
    (image_size as f64 - 1.0) / 2.0
}

#[inline]
pub fn normalize_point(p: Point, image_size: usize) -> Point {
    let h = half_extent(image_size);
    [p[0] / h - 1.0, p[1] / h - 1.0]
}

#[inline]
pub fn denormalize_point(p: Point, image_size: usize) -> Point {
    let h = half_extent(image_size);
    [(p[0] + 1.0) * h, (p[1] + 1.0) * h]
}

pub fn normalize_coords(points: &[Point], image_size: usize) -> Result<Vec<Point>> {
    check_size(image_size)?;
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(points
        .iter()
        .map(|&p| normalize_point(p, image_size))
        .collect())
}

pub fn denormalize_coords(points: &[Point], image_size: usize) -> Result<Vec<Point>> {
    check_size(image_size)?;
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(points
        .iter()
        .map(|&p| denormalize_point(p, image_size))
        .collect())
}

/// Normalized time of frame `frame` in a series of `frame_count` frames.
pub fn normalize_time(frame: usize, frame_count: usize) -> Result<f64> {
    if frame_count < 2 {
        return Err(Error::InvalidArgument("need at least 2 frames".to_string()));
    }
    if frame >= frame_count {
        return Err(Error::InvalidArgument(format!(
            "frame {frame} out of range for {frame_count} frames"
        )));
    }
    Ok(frame as f64 / (frame_count - 1) as f64)
}

/// Pixel displacement corresponding to a displacement in normalized units.
#[inline]
pub fn displacement_to_pixels(u: Point, image_size: usize) -> Point {
    let h = half_extent(image_size);
    [u[0] * h, u[1] * h]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn corners_and_midpoint() {
        let out = normalize_coords(&[[0.0, 0.0], [127.0, 127.0], [63.5, 63.5]], 128).unwrap();
        assert_eq!(out, vec![[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn inverse_examples() {
        let out = denormalize_coords(&[[0.0, 0.0], [-1.0, 1.0]], 128).unwrap();
        assert_eq!(out, vec![[63.5, 63.5], [0.0, 127.0]]);
    }

    #[test]
    fn rejects_empty_and_tiny() {
        assert_eq!(normalize_coords(&[], 128), Err(Error::EmptyInput));
        assert_eq!(denormalize_coords(&[], 128), Err(Error::EmptyInput));
        assert!(normalize_coords(&[[0.0, 0.0]], 1).is_err());
    }

    #[test]
    fn time_endpoints() {
        assert_eq!(normalize_time(0, 20).unwrap(), 0.0);
        assert_eq!(normalize_time(19, 20).unwrap(), 1.0);
        assert!(normalize_time(0, 1).is_err());
        assert!(normalize_time(20, 20).is_err());
    }

    #[test]
    fn thousand_point_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..1000)
            .map(|_| [rng.random_range(0.0..127.0), rng.random_range(0.0..127.0)])
            .collect();
        let back = denormalize_coords(&normalize_coords(&pts, 128).unwrap(), 128).unwrap();
        for (a, b) in pts.iter().zip(&back) {
            for d in 0..2 {
                assert!((a[d] - b[d]).abs() <= 1e-12 * a[d].abs().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn round_trips_are_identities(
            x in -500.0f64..500.0,
            y in -500.0f64..500.0,
            size in 2usize..2048,
        ) {
            let n = normalize_point(denormalize_point([x, y], size), size);
            prop_assert!((n[0] - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!((n[1] - y).abs() <= 1e-12 * y.abs().max(1.0));
            let p = denormalize_point(normalize_point([x, y], size), size);
            prop_assert!((p[0] - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!((p[1] - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
