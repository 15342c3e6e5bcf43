use crate::diffnet::ParamLayout;
use crate::real::Real;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments aligned with the canonical parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![T::ZERO; param_count],
            v: vec![T::ZERO; param_count],
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }
}

fn block_name(layout: Option<&ParamLayout>, index: usize) -> String {
    layout
        .and_then(|l| l.block_of(index))
        .map(|b| b.name.clone())
        .unwrap_or_else(|| format!("param[{index}]"))
}

/// One bias-corrected Adam update. Nothing is modified when a gradient entry
/// is non-finite.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut OptimizerState<T>,
    lr: f64,
    layout: Option<&ParamLayout>,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.m.len()
        || state.m.len() != state.v.len()
    {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(block_name(layout, i)));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::lit(state.beta1);
    let b2 = T::lit(state.beta2);
    let one_b1 = T::lit(1.0 - state.beta1);
    let one_b2 = T::lit(1.0 - state.beta2);
    let step_size = T::lit(lr / (1.0 - state.beta1.powi(t)));
    let inv_bc2 = T::lit(1.0 / (1.0 - state.beta2.powi(t)));
    let eps = T::lit(state.epsilon);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
    }
    Ok(())
}
