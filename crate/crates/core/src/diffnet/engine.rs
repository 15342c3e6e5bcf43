use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::{encode_with_tape, encoder_backward};
use super::mlp::{mlp_backward, mlp_forward, MlpTape};
use super::model::InrModel;
use super::modulation::{modulate, modulation_backward, Conditioning};
use crate::coords::Point;
use crate::objective::{loss_jacobian, loss_latent, loss_pos, Jacobian, LossWeights};
use crate::real::Real;
use crate::series::Image;
use crate::{Error, Result};

/// Displacement at one material point, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementResult {
    pub u: Point,
    /// `dX'/dX = I + du/dX`; row `r` differentiates component `r` of `X'`.
    pub jacobian: Option<Jacobian>,
}

/// Encodes an image pair and evaluates the modulation networks.
pub fn condition<T: Real>(
    model: &InrModel<T>,
    reference: &Image,
    target: &Image,
) -> Result<Conditioning<T>> {
    let (z, _) = encode_with_tape(model, reference, target)?;
    modulate(model, &z)
}

fn check_amplitudes<T: Real>(model: &InrModel<T>, cond: &Conditioning<T>) -> Result<()> {
    let cfg = model.config();
    if cond.amplitudes.len() != cfg.hidden_layers
        || cond.amplitudes.iter().any(|a| a.len() != cfg.hidden_size)
    {
        return Err(Error::ShapeMismatch(format!(
            "conditioning needs {} amplitude vectors of length {}",
            cfg.hidden_layers, cfg.hidden_size
        )));
    }
    Ok(())
}

fn coord_rows<T: Real>(points: &[Point], t: f64) -> Result<Vec<[T; 3]>> {
    if !t.is_finite() {
        return Err(Error::NonFinite("time coordinate".into()));
    }
    points
        .iter()
        .map(|p| {
            if p[0].is_finite() && p[1].is_finite() {
                Ok([T::lit(p[0]), T::lit(p[1]), T::lit(t)])
            } else {
                Err(Error::NonFinite("material coordinate".into()))
            }
        })
        .collect()
}

fn to_f64_jacobian<T: Real>(j: [[T; 2]; 2]) -> Jacobian {
    [
        [j[0][0].to_f64(), j[0][1].to_f64()],
        [j[1][0].to_f64(), j[1][1].to_f64()],
    ]
}

/// Evaluates `u = f(X, t, Z)` (and optionally `dX'/dX`) at many points that
/// share one conditioning.
pub fn displace<T: Real>(
    model: &InrModel<T>,
    cond: &Conditioning<T>,
    points: &[Point],
    t: f64,
    with_jacobian: bool,
) -> Result<Vec<DisplacementResult>> {
    check_amplitudes(model, cond)?;
    let coords = coord_rows::<T>(points, t)?;
    let tape = mlp_forward(model, &cond.amplitudes, &coords, with_jacobian);
    Ok((0..points.len())
        .map(|p| {
            let u = tape.u(p);
            DisplacementResult {
                u: [u[0].to_f64(), u[1].to_f64()],
                jacobian: with_jacobian.then(|| to_f64_jacobian(tape.jacobian(p))),
            }
        })
        .collect())
}

/// Single-point displacement from a latent code.
pub fn forward<T: Real>(
    model: &InrModel<T>,
    x: Point,
    t: f64,
    z: &[T],
) -> Result<DisplacementResult> {
    let cond = modulate(model, z)?;
    Ok(displace(model, &cond, &[x], t, false)?[0])
}

/// Exact `dX'/dX` at one point; the time derivative is not part of it.
pub fn input_jacobian<T: Real>(model: &InrModel<T>, x: Point, t: f64, z: &[T]) -> Result<Jacobian> {
    let cond = modulate(model, z)?;
    Ok(displace(model, &cond, &[x], t, true)?[0]
        .jacobian
        .expect("requested jacobian"))
}

/// One supervised image pair with its tracked points, all normalized.
#[derive(Debug, Clone)]
pub struct SupervisionSample<'a> {
    pub reference: &'a Image,
    pub target: &'a Image,
    pub t: f64,
    /// Material coordinates in the reference frame.
    pub points: Vec<Point>,
    /// Tracked positions of `points` at time `t`.
    pub targets: Vec<Point>,
    /// Where the Jacobian term is evaluated; `None` reuses `points`.
    pub jacobian_points: Option<Vec<Point>>,
}

/// Multipliers on the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermWeights {
    pub pos: f64,
    pub jac: f64,
    pub latent: f64,
}

impl From<LossWeights> for TermWeights {
    fn from(w: LossWeights) -> Self {
        Self {
            pos: 1.0,
            jac: w.alpha,
            latent: w.beta,
        }
    }
}

/// Batch-mean values of the three loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub pos: f64,
    pub jac: f64,
    pub latent: f64,
}

impl LossParts {
    pub fn weighted(&self, w: TermWeights) -> f64 {
        w.pos * self.pos + w.jac * self.jac + w.latent * self.latent
    }

    fn add_scaled(&mut self, other: &LossParts, s: f64) {
        self.pos += s * other.pos;
        self.jac += s * other.jac;
        self.latent += s * other.latent;
    }

    fn check_finite(&self) -> Result<()> {
        for (name, v) in [
            ("position loss", self.pos),
            ("jacobian loss", self.jac),
            ("latent loss", self.latent),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(())
    }
}

/// Loss value and its gradient over the canonical parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<T> {
    pub loss: f64,
    pub parts: LossParts,
    pub grads: Vec<T>,
}

struct SampleEval<T: Real> {
    cond: Conditioning<T>,
    tape: MlpTape<T>,
    n_pos: usize,
    jac_offset: usize,
    n_jac: usize,
    parts: LossParts,
}

fn evaluate_sample<T: Real>(
    model: &InrModel<T>,
    sample: &SupervisionSample<'_>,
    tangents: bool,
) -> Result<(SampleEval<T>, super::encoder::EncoderTape<T>)> {
    if sample.points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sample.points.len() != sample.targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} targets",
            sample.points.len(),
            sample.targets.len()
        )));
    }
    let (z, enc_tape) = encode_with_tape(model, sample.reference, sample.target)?;
    let cond = modulate(model, &z)?;

    let n_pos = sample.points.len();
    let (coords, jac_offset, n_jac) = match &sample.jacobian_points {
        None => (coord_rows::<T>(&sample.points, sample.t)?, 0, n_pos),
        Some(extra) => {
            if extra.is_empty() {
                return Err(Error::EmptyInput);
            }
            let mut all = sample.points.clone();
            all.extend_from_slice(extra);
            (coord_rows::<T>(&all, sample.t)?, n_pos, extra.len())
        }
    };
    let tape = mlp_forward(model, &cond.amplitudes, &coords, tangents);

    let predicted: Vec<Point> = (0..n_pos)
        .map(|p| {
            let u = tape.u(p);
            [
                sample.points[p][0] + u[0].to_f64(),
                sample.points[p][1] + u[1].to_f64(),
            ]
        })
        .collect();
    let pos = loss_pos(&predicted, &sample.targets)?;
    let jac = if tangents {
        let js: Vec<Jacobian> = (jac_offset..jac_offset + n_jac)
            .map(|p| to_f64_jacobian(tape.jacobian(p)))
            .collect();
        loss_jacobian(&js)?
    } else {
        0.0
    };
    let z64: Vec<f64> = cond.z.iter().map(|v| v.to_f64()).collect();
    let latent = loss_latent(&z64)?;

    Ok((
        SampleEval {
            cond,
            tape,
            n_pos,
            jac_offset,
            n_jac,
            parts: LossParts { pos, jac, latent },
        },
        enc_tape,
    ))
}

fn sample_gradients<T: Real>(
    model: &InrModel<T>,
    sample: &SupervisionSample<'_>,
    weights: TermWeights,
    scale: f64,
) -> Result<(LossParts, Vec<T>)> {
    let (eval, enc_tape) = evaluate_sample(model, sample, true)?;
    eval.parts.check_finite()?;
    let tape = &eval.tape;
    let n = tape.n;
    let use_jac = weights.jac != 0.0;
    let rows_used = if use_jac { tape.rows } else { n };
    let mut out_grad = vec![T::ZERO; rows_used * 2];

    let pos_scale = T::lit(weights.pos * scale * 2.0 / eval.n_pos as f64);
    for p in 0..eval.n_pos {
        let u = tape.u(p);
        let target = sample.targets[p];
        let src = sample.points[p];
        out_grad[p * 2] = pos_scale * (T::lit(src[0]) + u[0] - T::lit(target[0]));
        out_grad[p * 2 + 1] = pos_scale * (T::lit(src[1]) + u[1] - T::lit(target[1]));
    }

    if use_jac {
        let jac_scale = T::lit(weights.jac * scale / eval.n_jac as f64);
        for p in eval.jac_offset..eval.jac_offset + eval.n_jac {
            let j = tape.jacobian(p);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            // d|1 - det| / d det
            let g = -(T::ONE - det).signum_or_zero() * jac_scale;
            let x = (n + p) * 2;
            let y = (2 * n + p) * 2;
            out_grad[x] = g * j[1][1];
            out_grad[x + 1] = -g * j[0][1];
            out_grad[y] = -g * j[1][0];
            out_grad[y + 1] = g * j[0][0];
        }
    }

    let mut grads = vec![T::ZERO; model.param_count()];
    let amp_grads = mlp_backward(
        model,
        &eval.cond.amplitudes,
        tape,
        &out_grad,
        rows_used,
        &mut grads,
    );
    let mut z_grad = modulation_backward(model, &eval.cond, &amp_grads, &mut grads);
    let lat_scale = T::lit(weights.latent * scale * 2.0 / z_grad.len() as f64);
    for (g, &z) in z_grad.iter_mut().zip(&eval.cond.z) {
        *g += lat_scale * z;
    }
    encoder_backward(model, &enc_tape, &z_grad, &mut grads);
    Ok((eval.parts, grads))
}

/// Batch-mean loss and exact parameter gradients with explicit term weights.
///
/// Samples are evaluated in parallel on the current rayon pool and reduced in
/// batch order, so the result does not depend on the worker count.
pub fn loss_gradients_terms<T: Real>(
    model: &InrModel<T>,
    batch: &[SupervisionSample<'_>],
    weights: TermWeights,
) -> Result<GradientBundle<T>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scale = 1.0 / batch.len() as f64;
    let per_sample: Vec<Result<(LossParts, Vec<T>)>> = batch
        .par_iter()
        .map(|s| sample_gradients(model, s, weights, scale))
        .collect();

    let mut parts = LossParts::default();
    let mut grads = vec![T::ZERO; model.param_count()];
    for r in per_sample {
        let (p, g) = r?;
        parts.add_scaled(&p, scale);
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += *v;
        }
    }
    parts.check_finite()?;
    Ok(GradientBundle {
        loss: parts.weighted(weights),
        parts,
        grads,
    })
}

/// Total loss `L_pos + alpha L_J + beta L_Z` and its gradient.
pub fn loss_gradients<T: Real>(
    model: &InrModel<T>,
    batch: &[SupervisionSample<'_>],
    weights: LossWeights,
) -> Result<GradientBundle<T>> {
    loss_gradients_terms(model, batch, weights.into())
}

/// Batch-mean loss parts without gradients.
pub fn loss_parts<T: Real>(
    model: &InrModel<T>,
    batch: &[SupervisionSample<'_>],
    with_jacobian: bool,
) -> Result<LossParts> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut parts = LossParts::default();
    for s in batch {
        let (eval, _) = evaluate_sample(model, s, with_jacobian)?;
        parts.add_scaled(&eval.parts, scale);
    }
    Ok(parts)
}
