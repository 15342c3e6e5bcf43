//! Tagged-image rendering by pulling pixels back to the reference frame.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::deformation::{inverse_deform_point, AnalyticDeformation};
use crate::coords::{denormalize_point, normalize_point};
use crate::series::Image;

/// SPAMM-like grid: `1/4 (1 + B cos(2 pi u / lambda)) (1 + B cos(2 pi v / lambda))`
/// in material coordinates rotated by `grid_angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagPattern {
    /// Tag period in pixels.
    pub spacing_px: f64,
    pub contrast: f64,
    /// Frames for the tag modulation depth to halve.
    pub half_life_frames: f64,
    pub noise_sigma: f64,
    pub myocardium: f64,
    pub blood: f64,
    pub background: f64,
    pub grid_angle: f64,
}

impl Default for TagPattern {
    fn default() -> Self {
        Self {
            spacing_px: 7.0,
            contrast: 1.0,
            half_life_frames: 12.0,
            noise_sigma: 0.0,
            myocardium: 0.8,
            blood: 0.35,
            background: 0.15,
            grid_angle: 0.0,
        }
    }
}

impl TagPattern {
    /// Tag modulation depth `exp(-t F ln2 / half_life)`.
    pub fn modulation_depth(&self, t: f64, frame_count: usize) -> f64 {
        (-t * frame_count as f64 * std::f64::consts::LN_2 / self.half_life_frames).exp()
    }

    /// Noise-free myocardial intensity at a material point given in pixels.
    pub fn myocardial_intensity(&self, material_px: [f64; 2], depth: f64) -> f64 {
        let (sa, ca) = self.grid_angle.sin_cos();
        let u = ca * material_px[0] - sa * material_px[1];
        let v = sa * material_px[0] + ca * material_px[1];
        let w = std::f64::consts::TAU / self.spacing_px;
        let b = self.contrast;
        let grid = 0.25 * (1.0 + b * (w * u).cos()) * (1.0 + b * (w * v).cos());
        depth * grid * self.myocardium + (1.0 - depth) * self.myocardium
    }
}

/// Myocardial annulus and raster size. Radii are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r_endo: f64,
    pub r_epi: f64,
    pub image_size: usize,
}

/// Renders the frame at normalized time `t`.
pub fn render_frame<R: Rng + ?Sized>(
    def: &AnalyticDeformation,
    pattern: &TagPattern,
    t: f64,
    geometry: &Geometry,
    frame_count: usize,
    rng: &mut R,
) -> Image {
    let size = geometry.image_size;
    let depth = pattern.modulation_depth(t, frame_count);
    let noise = (pattern.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, pattern.noise_sigma).expect("finite sigma"));
    let mut data = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let xp = normalize_point([col as f64, row as f64], size);
            let x = inverse_deform_point(def, xp, t);
            let r = (x[0] - def.center[0]).hypot(x[1] - def.center[1]);
            let base = if r < geometry.r_endo {
                pattern.blood
            } else if r <= geometry.r_epi {
                pattern.myocardial_intensity(denormalize_point(x, size), depth)
            } else {
                pattern.background
            };
            let value = match &noise {
                Some(n) => base + n.sample(rng),
                None => base,
            };
            data.push(value.clamp(0.0, 1.0) as f32);
        }
    }
    Image::new(size, data).expect("clamped intensities")
}
