//! Closed-form myocardial deformations in normalized coordinates.
//!
//! About a center `c`, a point at polar `(r, theta)` moves to
//! `(g(r, t), theta + tau s(t))` and is then translated by `d s(t)`, where
//! `s` is a smooth bump peaking at end-systole. The incompressible radial map
//! `g = sqrt(r^2 - k s(t))` preserves area exactly; the wall-thickening map
//! keeps the epicardium fixed and stretches radial segments uniformly.

use serde::{Deserialize, Serialize};

use crate::coords::Point;
use crate::objective::Jacobian;
use crate::{Error, Result};

/// `s(0) = 0`, `s(t_es) = 1`, `s(1) = s_end`, with zero slope at `t_es`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub t_es: f64,
    pub s_end: f64,
}

impl TemporalProfile {
    pub fn new(t_es: f64, s_end: f64) -> Result<Self> {
        if !(t_es > 0.0 && t_es < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "t_es must lie in (0, 1), got {t_es}"
            )));
        }
        if !(0.0..=1.0).contains(&s_end) {
            return Err(Error::InvalidArgument(format!(
                "s_end must lie in [0, 1], got {s_end}"
            )));
        }
        Ok(Self { t_es, s_end })
    }

    pub fn value(&self, t: f64) -> f64 {
        use std::f64::consts::FRAC_PI_2;
        let t = t.clamp(0.0, 1.0);
        if t <= self.t_es {
            (FRAC_PI_2 * t / self.t_es).sin().powi(2)
        } else {
            let u = (t - self.t_es) / (1.0 - self.t_es);
            self.s_end + (1.0 - self.s_end) * (FRAC_PI_2 * u).cos().powi(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialMode {
    /// `r' = sqrt(r^2 - k_max s(t))`; area preserving.
    Incompressible,
    /// `r' = r_epi - (r_epi - r)(1 + thickening s(t))`; not area preserving.
    WallThickening { r_epi: f64, thickening: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticDeformation {
    pub center: Point,
    /// Peak decrement of the squared radius.
    pub k_max: f64,
    /// Peak twist in radians.
    pub tau_max: f64,
    pub profile: TemporalProfile,
    /// Peak translation; the drift at time `t` is `drift * s(t)`.
    pub drift: Point,
    pub mode: RadialMode,
}

impl AnalyticDeformation {
    pub fn identity(center: Point) -> Self {
        Self {
            center,
            k_max: 0.0,
            tau_max: 0.0,
            profile: TemporalProfile {
                t_es: 0.35,
                s_end: 0.0,
            },
            drift: [0.0, 0.0],
            mode: RadialMode::Incompressible,
        }
    }

    pub fn is_area_preserving(&self) -> bool {
        matches!(self.mode, RadialMode::Incompressible)
    }

    /// `k(t) = k_max s(t)`.
    pub fn k(&self, t: f64) -> f64 {
        match self.mode {
            RadialMode::Incompressible => self.k_max * self.profile.value(t),
            RadialMode::WallThickening { .. } => 0.0,
        }
    }

    fn drift_at(&self, s: f64) -> Point {
        [self.drift[0] * s, self.drift[1] * s]
    }

    /// Radial map `g(r)` and its derivative at profile value `s`.
    fn radial(&self, r: f64, s: f64) -> Result<(f64, f64)> {
        match self.mode {
            RadialMode::Incompressible => {
                let k = self.k_max * s;
                let r_sq = r * r;
                if r_sq < k {
                    return Err(Error::CollapseRadius { r_sq, k });
                }
                let rp = (r_sq - k).sqrt();
                let slope = if k == 0.0 { 1.0 } else { r / rp };
                Ok((rp, slope))
            }
            RadialMode::WallThickening { r_epi, thickening } => {
                let f = 1.0 + thickening * s;
                let rp = r_epi - (r_epi - r) * f;
                if rp <= 0.0 {
                    return Err(Error::CollapseRadius {
                        r_sq: r * r,
                        k: 0.0,
                    });
                }
                Ok((rp, f))
            }
        }
    }

    fn radial_inverse(&self, rp: f64, s: f64) -> f64 {
        match self.mode {
            RadialMode::Incompressible => (rp * rp + self.k_max * s).sqrt(),
            RadialMode::WallThickening { r_epi, thickening } => {
                r_epi - (r_epi - rp) / (1.0 + thickening * s)
            }
        }
    }
}

pub fn deform_point(def: &AnalyticDeformation, x: Point, t: f64) -> Result<Point> {
    let s = def.profile.value(t);
    let (dx, dy) = (x[0] - def.center[0], x[1] - def.center[1]);
    let r = dx.hypot(dy);
    let (rp, _) = def.radial(r, s)?;
    let theta = dy.atan2(dx) + def.tau_max * s;
    let d = def.drift_at(s);
    Ok([
        def.center[0] + rp * theta.cos() + d[0],
        def.center[1] + rp * theta.sin() + d[1],
    ])
}

pub fn inverse_deform_point(def: &AnalyticDeformation, xp: Point, t: f64) -> Point {
    let s = def.profile.value(t);
    let d = def.drift_at(s);
    let (dx, dy) = (xp[0] - d[0] - def.center[0], xp[1] - d[1] - def.center[1]);
    let rp = dx.hypot(dy);
    let r = def.radial_inverse(rp, s);
    let theta = dy.atan2(dx) - def.tau_max * s;
    [
        def.center[0] + r * theta.cos(),
        def.center[1] + r * theta.sin(),
    ]
}

/// Closed-form spatial Jacobian `dX'/dX` of [`deform_point`].
///
/// In polar form `J = R(theta') diag(g'(r), g(r)/r) R(theta)^T`.
pub fn deformation_jacobian(def: &AnalyticDeformation, x: Point, t: f64) -> Result<Jacobian> {
    let s = def.profile.value(t);
    let (dx, dy) = (x[0] - def.center[0], x[1] - def.center[1]);
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::InvalidArgument(
            "jacobian undefined at the center".into(),
        ));
    }
    let (rp, slope) = def.radial(r, s)?;
    let theta = dy.atan2(dx);
    let theta_p = theta + def.tau_max * s;
    let (c0, s0) = (theta.cos(), theta.sin());
    let (c1, s1) = (theta_p.cos(), theta_p.sin());
    let (a, b) = (slope, rp / r);
    // R(theta') * diag(a, b)
    let m = [[c1 * a, -s1 * b], [s1 * a, c1 * b]];
    // ... * R(theta)^T
    Ok([
        [m[0][0] * c0 - m[0][1] * s0, m[0][0] * s0 + m[0][1] * c0],
        [m[1][0] * c0 - m[1][1] * s0, m[1][0] * s0 + m[1][1] * c0],
    ])
}
