use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::deformation::{deform_point, AnalyticDeformation, RadialMode, TemporalProfile};
use super::render::{render_frame, Geometry, TagPattern};
use crate::coords::{denormalize_point, half_extent, normalize_point, normalize_time, Point};
use crate::landmarks::{make_landmark_grid, LandmarkGrid, DEFAULT_RINGS, DEFAULT_SPOKES};
use crate::series::{CaseRecord, TagFrameSeries, IMAGE_SIZE};
use crate::{Error, Result};

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::InvalidArgument(format!(
                "invalid range for {name}: [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Sampling ranges for synthetic cases. Lengths are normalized unless the
/// name says pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub frame_count: usize,
    pub image_size: usize,
    pub pixel_spacing_mm: f64,
    pub frame_interval_s: f64,
    pub rings: usize,
    pub spokes: usize,
    pub center_jitter: f64,
    pub r_endo: Span,
    pub wall_thickness: Span,
    /// Fractional shrink of the mid-wall radius at end-systole.
    pub midwall_shrink: Span,
    pub twist: Span,
    pub t_es: Span,
    pub s_end: Span,
    /// Peak drift magnitude; direction is uniform.
    pub drift: Span,
    /// When set, cases use the non-incompressible wall-thickening map.
    pub thickening: Option<Span>,
    pub tag_spacing_px: Span,
    pub tag_contrast: Span,
    pub half_life_frames: Span,
    pub noise_sigma: Span,
    pub myocardium: Span,
    pub blood: Span,
    pub background: Span,
    pub randomize_grid_angle: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frame_count: 20,
            image_size: IMAGE_SIZE,
            pixel_spacing_mm: 1.0,
            frame_interval_s: 0.04,
            rings: DEFAULT_RINGS,
            spokes: DEFAULT_SPOKES,
            center_jitter: 0.04,
            r_endo: Span::new(0.22, 0.28),
            wall_thickness: Span::new(0.15, 0.20),
            midwall_shrink: Span::new(0.14, 0.22),
            twist: Span::new(-0.12, 0.12),
            t_es: Span::new(0.3, 0.4),
            s_end: Span::new(0.0, 0.15),
            drift: Span::new(0.0, 0.03),
            thickening: None,
            tag_spacing_px: Span::new(6.0, 8.0),
            tag_contrast: Span::new(0.7, 1.0),
            half_life_frames: Span::new(12.0, 24.0),
            noise_sigma: Span::new(0.0, 0.04),
            myocardium: Span::new(0.7, 0.9),
            blood: Span::new(0.25, 0.45),
            background: Span::new(0.05, 0.2),
            randomize_grid_angle: true,
        }
    }
}

impl SynthConfig {
    /// All motion amplitudes set to zero.
    pub fn motionless(mut self) -> Self {
        self.midwall_shrink = Span::fixed(0.0);
        self.twist = Span::fixed(0.0);
        self.drift = Span::fixed(0.0);
        self.thickening = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::InvalidArgument("need at least 2 frames".into()));
        }
        if self.image_size < 8 {
            return Err(Error::InvalidArgument(format!(
                "image size {} too small",
                self.image_size
            )));
        }
        if !(self.pixel_spacing_mm > 0.0 && self.frame_interval_s > 0.0) {
            return Err(Error::InvalidArgument(
                "pixel spacing and frame interval must be positive".into(),
            ));
        }
        if self.rings < 2 || self.spokes < 3 {
            return Err(Error::InvalidArgument(
                "grid needs >= 2 rings and >= 3 spokes".into(),
            ));
        }
        let spans = [
            ("r_endo", self.r_endo),
            ("wall_thickness", self.wall_thickness),
            ("midwall_shrink", self.midwall_shrink),
            ("twist", self.twist),
            ("t_es", self.t_es),
            ("s_end", self.s_end),
            ("drift", self.drift),
            ("tag_spacing_px", self.tag_spacing_px),
            ("tag_contrast", self.tag_contrast),
            ("half_life_frames", self.half_life_frames),
            ("noise_sigma", self.noise_sigma),
            ("myocardium", self.myocardium),
            ("blood", self.blood),
            ("background", self.background),
        ];
        for (name, span) in spans {
            span.validate(name)?;
        }
        if let Some(th) = self.thickening {
            th.validate("thickening")?;
            if th.min < 0.0 {
                return Err(Error::InvalidArgument(
                    "thickening must be nonnegative".into(),
                ));
            }
        }
        let positive = [
            ("r_endo", self.r_endo.min),
            ("wall_thickness", self.wall_thickness.min),
            ("tag_spacing_px", self.tag_spacing_px.min),
            ("half_life_frames", self.half_life_frames.min),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.midwall_shrink.min < 0.0 || self.midwall_shrink.max >= 1.0 {
            return Err(Error::InvalidArgument(
                "midwall_shrink must lie in [0, 1)".into(),
            ));
        }
        if self.t_es.min <= 0.0 || self.t_es.max >= 1.0 {
            return Err(Error::InvalidArgument("t_es must lie in (0, 1)".into()));
        }
        if self.s_end.min < 0.0 || self.s_end.max > 1.0 {
            return Err(Error::InvalidArgument("s_end must lie in [0, 1]".into()));
        }
        if self.noise_sigma.min < 0.0 || self.drift.min < 0.0 || self.center_jitter < 0.0 {
            return Err(Error::InvalidArgument(
                "noise, drift and jitter must be nonnegative".into(),
            ));
        }
        for (name, s) in [
            ("tag_contrast", self.tag_contrast),
            ("myocardium", self.myocardium),
            ("blood", self.blood),
            ("background", self.background),
        ] {
            if s.min < 0.0 || s.max > 1.0 {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

const MAX_RETRIES: usize = 64;
/// The endocardium may shrink to no less than this fraction of its radius.
const MIN_ENDO_FRACTION: f64 = 0.3;
/// Landmarks must stay this many pixels inside the image.
const BORDER_PX: f64 = 2.0;

struct Sampled {
    def: AnalyticDeformation,
    geometry: Geometry,
    pattern: TagPattern,
}

fn sample_parameters(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Sampled {
    let jitter = config.center_jitter;
    let center = if jitter > 0.0 {
        [
            rng.random_range(-jitter..=jitter),
            rng.random_range(-jitter..=jitter),
        ]
    } else {
        [0.0, 0.0]
    };
    let r_endo = config.r_endo.sample(rng);
    let r_epi = r_endo + config.wall_thickness.sample(rng);
    let r_mid = 0.5 * (r_endo + r_epi);
    let q = config.midwall_shrink.sample(rng);
    let k_max = r_mid * r_mid * (1.0 - (1.0 - q).powi(2));
    let tau_max = config.twist.sample(rng);
    let t_es = config.t_es.sample(rng);
    let s_end = config.s_end.sample(rng);
    let drift_mag = config.drift.sample(rng);
    let drift_dir = rng.random_range(0.0..std::f64::consts::TAU);
    let mode = match config.thickening {
        Some(span) => RadialMode::WallThickening {
            r_epi,
            thickening: span.sample(rng),
        },
        None => RadialMode::Incompressible,
    };
    let def = AnalyticDeformation {
        center,
        k_max: if config.thickening.is_some() {
            0.0
        } else {
            k_max
        },
        tau_max,
        profile: TemporalProfile { t_es, s_end },
        drift: [drift_mag * drift_dir.cos(), drift_mag * drift_dir.sin()],
        mode,
    };
    let pattern = TagPattern {
        spacing_px: config.tag_spacing_px.sample(rng),
        contrast: config.tag_contrast.sample(rng),
        half_life_frames: config.half_life_frames.sample(rng),
        noise_sigma: config.noise_sigma.sample(rng),
        myocardium: config.myocardium.sample(rng),
        blood: config.blood.sample(rng),
        background: config.background.sample(rng),
        grid_angle: if config.randomize_grid_angle {
            rng.random_range(0.0..std::f64::consts::FRAC_PI_2)
        } else {
            0.0
        },
    };
    Sampled {
        def,
        geometry: Geometry {
            r_endo,
            r_epi,
            image_size: config.image_size,
        },
        pattern,
    }
}

/// Exact landmark trajectories of `reference` (pixel units) under `def`.
pub fn landmark_trajectories(
    def: &AnalyticDeformation,
    reference: &LandmarkGrid,
    frame_count: usize,
    image_size: usize,
) -> Result<LandmarkGrid> {
    let base = reference.points(0);
    let mut frames = Vec::with_capacity(frame_count);
    for k in 0..frame_count {
        let t = normalize_time(k, frame_count)?;
        let pts = base
            .iter()
            .map(|&p| {
                deform_point(def, normalize_point(p, image_size), t)
                    .map(|q| denormalize_point(q, image_size))
            })
            .collect::<Result<Vec<Point>>>()?;
        frames.push(pts);
    }
    LandmarkGrid::new(reference.rings(), reference.spokes(), frames)
}

fn within_image(grid: &LandmarkGrid, size: usize) -> bool {
    let hi = (size - 1) as f64 - BORDER_PX;
    grid.frames()
        .iter()
        .flatten()
        .all(|p| p[0] >= BORDER_PX && p[1] >= BORDER_PX && p[0] <= hi && p[1] <= hi)
}

/// One synthetic slice; a pure function of `(seed ^ case_index, config)`.
pub fn generate_case(seed: u64, case_index: u64, config: &SynthConfig) -> Result<CaseRecord> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ case_index);
    let size = config.image_size;
    let h = half_extent(size);

    for _ in 0..MAX_RETRIES {
        let Sampled {
            def,
            geometry,
            pattern,
        } = sample_parameters(config, &mut rng);
        if def.is_area_preserving() {
            let min_r_sq = (MIN_ENDO_FRACTION * geometry.r_endo).powi(2);
            if geometry.r_endo.powi(2) - def.k_max < min_r_sq {
                continue;
            }
        }
        let reference = make_landmark_grid(
            denormalize_point(def.center, size),
            geometry.r_endo * h,
            geometry.r_epi * h,
            config.rings,
            config.spokes,
        )?;
        let Ok(exact) = landmark_trajectories(&def, &reference, config.frame_count, size) else {
            continue;
        };
        if !within_image(&exact, size) {
            continue;
        }
        // Stored landmarks carry the same single precision as the payload files.
        let landmarks = exact.map_points(|p| [p[0] as f32 as f64, p[1] as f32 as f64]);

        let frames = (0..config.frame_count)
            .map(|k| {
                let t = normalize_time(k, config.frame_count)?;
                Ok(render_frame(
                    &def,
                    &pattern,
                    t,
                    &geometry,
                    config.frame_count,
                    &mut rng,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let series = TagFrameSeries::new(
            frames,
            config.pixel_spacing_mm,
            config.frame_interval_s,
            format!("synth-{case_index:04}"),
            0,
        )?;
        return CaseRecord::new(series, landmarks, Some(def));
    }
    Err(Error::Generation(format!(
        "no admissible deformation for case {case_index} after {MAX_RETRIES} draws"
    )))
}

/// Cases `first..first + count`; parallel and serial generation agree bitwise.
pub fn generate_dataset(
    seed: u64,
    first: u64,
    count: usize,
    config: &SynthConfig,
) -> Result<Vec<CaseRecord>> {
    (first..first + count as u64)
        .into_par_iter()
        .map(|i| generate_case(seed, i, config))
        .collect()
}
