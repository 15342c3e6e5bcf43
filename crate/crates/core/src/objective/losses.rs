use serde::{Deserialize, Serialize};

use crate::coords::Point;
use crate::{Error, Result};

/// 2x2 matrix, row-major.
pub type Jacobian = [[f64; 2]; 2];

/// Regularisation weights: `alpha` on the Jacobian term, `beta` on the
/// latent term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 1e-4,
        }
    }
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be finite and nonnegative, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// Mean squared Euclidean distance between corresponding points.
pub fn loss_pos(predicted: &[Point], target: &[Point]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted points vs {} targets",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = predicted
        .iter()
        .zip(target)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// Mean squared latent entry.
pub fn loss_latent(z: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64)
}

#[inline]
pub fn det2(j: &Jacobian) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Mean absolute deviation of `det J` from one.
pub fn loss_jacobian(jacobians: &[Jacobian]) -> Result<f64> {
    if jacobians.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(jacobians.iter().map(|j| (1.0 - det2(j)).abs()).sum::<f64>() / jacobians.len() as f64)
}

/// `L_pos + alpha L_J + beta L_Z`.
pub fn total_loss(pos: f64, jac: f64, latent: f64, weights: LossWeights) -> f64 {
    pos + weights.alpha * jac + weights.beta * latent
}
