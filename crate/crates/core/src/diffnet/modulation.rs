//! Per-layer modulation networks `a_i = M_i(Z)`: one rectified hidden layer
//! and an affine output.

use super::config::BlockRole;
use super::model::InrModel;
use crate::real::Real;
use crate::{Error, Result};

/// Latent code together with the amplitudes it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning<T> {
    pub z: Vec<T>,
    /// One amplitude vector per hidden layer.
    pub amplitudes: Vec<Vec<T>>,
    pub(crate) hidden: Vec<Vec<T>>,
}

impl<T: Real> Conditioning<T> {
    /// Conditioning with explicitly supplied amplitudes, bypassing `M_i`.
    pub fn from_amplitudes(z: Vec<T>, amplitudes: Vec<Vec<T>>) -> Self {
        Self {
            z,
            amplitudes,
            hidden: Vec::new(),
        }
    }
}

pub fn modulate<T: Real>(model: &InrModel<T>, z: &[T]) -> Result<Conditioning<T>> {
    let cfg = model.config();
    if z.len() != cfg.latent_size {
        return Err(Error::ShapeMismatch(format!(
            "latent code has {} entries, model expects {}",
            z.len(),
            cfg.latent_size
        )));
    }
    let m = cfg.modulation_hidden;
    let mut amplitudes = Vec::with_capacity(cfg.hidden_layers);
    let mut hidden = Vec::with_capacity(cfg.hidden_layers);
    for i in 0..cfg.hidden_layers {
        let w1 = model.block(BlockRole::ModHiddenWeight(i));
        let b1 = model.block(BlockRole::ModHiddenBias(i));
        let r: Vec<T> = w1
            .chunks_exact(cfg.latent_size)
            .zip(b1)
            .map(|(row, &b)| {
                let q = row.iter().zip(z).map(|(&w, &v)| w * v).sum::<T>() + b;
                if q > T::ZERO {
                    q
                } else {
                    T::ZERO
                }
            })
            .collect();
        let w2 = model.block(BlockRole::ModOutWeight(i));
        let b2 = model.block(BlockRole::ModOutBias(i));
        let a: Vec<T> = w2
            .chunks_exact(m)
            .zip(b2)
            .map(|(row, &b)| row.iter().zip(&r).map(|(&w, &v)| w * v).sum::<T>() + b)
            .collect();
        amplitudes.push(a);
        hidden.push(r);
    }
    Ok(Conditioning {
        z: z.to_vec(),
        amplitudes,
        hidden,
    })
}

/// Accumulates modulation-network gradients and returns `dL/dZ`.
pub(crate) fn modulation_backward<T: Real>(
    model: &InrModel<T>,
    cond: &Conditioning<T>,
    amp_grads: &[Vec<T>],
    grads: &mut [T],
) -> Vec<T> {
    let cfg = model.config();
    let layout = model.layout();
    let m = cfg.modulation_hidden;
    let l = cfg.latent_size;
    let mut z_grad = vec![T::ZERO; l];
    for (i, a_grad) in amp_grads.iter().enumerate() {
        let r = &cond.hidden[i];
        let w2 = model.block(BlockRole::ModOutWeight(i));
        let mut r_grad = vec![T::ZERO; m];
        {
            let gw2 = &mut grads[layout.range(BlockRole::ModOutWeight(i))];
            for ((grow, wrow), &ga) in gw2.chunks_exact_mut(m).zip(w2.chunks_exact(m)).zip(a_grad) {
                for j in 0..m {
                    grow[j] += ga * r[j];
                    r_grad[j] += ga * wrow[j];
                }
            }
        }
        for (b, &ga) in grads[layout.range(BlockRole::ModOutBias(i))]
            .iter_mut()
            .zip(a_grad)
        {
            *b += ga;
        }
        for (g, &v) in r_grad.iter_mut().zip(r) {
            if v <= T::ZERO {
                *g = T::ZERO;
            }
        }
        let w1 = model.block(BlockRole::ModHiddenWeight(i));
        {
            let gw1 = &mut grads[layout.range(BlockRole::ModHiddenWeight(i))];
            for ((grow, wrow), &gr) in gw1.chunks_exact_mut(l).zip(w1.chunks_exact(l)).zip(&r_grad)
            {
                for j in 0..l {
                    grow[j] += gr * cond.z[j];
                    z_grad[j] += gr * wrow[j];
                }
            }
        }
        for (b, &gr) in grads[layout.range(BlockRole::ModHiddenBias(i))]
            .iter_mut()
            .zip(&r_grad)
        {
            *b += gr;
        }
    }
    z_grad
}
