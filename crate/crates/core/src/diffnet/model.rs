use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::config::{BlockRole, ModelConfig, ParamLayout, KERNEL};
use crate::real::Real;
use crate::{Error, Result};

/// All learnable parameters of the conditioned displacement network, stored
/// flat in canonical order (see [`ParamLayout`]).
#[derive(Debug, Clone, PartialEq)]
pub struct InrModel<T: Real> {
    config: ModelConfig,
    layout: ParamLayout,
    params: Vec<T>,
}

impl<T: Real> InrModel<T> {
    /// Zero-parameter model.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let params = vec![T::ZERO; layout.total()];
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: ModelConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters supplied, configuration implies {}",
                params.len(),
                layout.total()
            )));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn omega(&self) -> T {
        T::lit(self.config.omega)
    }

    #[inline]
    pub(crate) fn block(&self, role: BlockRole) -> &[T] {
        &self.params[self.layout.range(role)]
    }

    pub fn block_mut(&mut self, role: BlockRole) -> &mut [T] {
        let r = self.layout.range(role);
        &mut self.params[r]
    }

    /// Same parameters in another arithmetic mode.
    pub fn cast<U: Real>(&self) -> InrModel<U> {
        InrModel {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::lit(p.to_f64())).collect(),
        }
    }
}

/// Deterministic initialization.
///
/// First MLP layer: `U(-1/n, 1/n)`; later MLP layers (output included):
/// `U(-sqrt(6/n)/omega, sqrt(6/n)/omega)`; encoder and modulation weights:
/// `U(-sqrt(6/n), sqrt(6/n))` with `n` the fan-in. Biases start at zero.
pub fn init_model<T: Real>(seed: u64, config: ModelConfig) -> Result<InrModel<T>> {
    let mut model = InrModel::<T>::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = model.config.omega;
    let blocks = model.layout.blocks().to_vec();
    for block in blocks {
        let limit = match block.role {
            BlockRole::ConvWeight(l) => {
                let fan_in = model.config.conv_in_channels(l) * KERNEL * KERNEL;
                (6.0 / fan_in as f64).sqrt()
            }
            BlockRole::ProjWeight | BlockRole::ModHiddenWeight(_) | BlockRole::ModOutWeight(_) => {
                (6.0 / block.shape[1] as f64).sqrt()
            }
            BlockRole::MlpWeight(0) => 1.0 / block.shape[1] as f64,
            BlockRole::MlpWeight(_) => (6.0 / block.shape[1] as f64).sqrt() / omega,
            _ => continue,
        };
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite init bound");
        for p in &mut model.params[block.range()] {
            *p = T::lit(dist.sample(&mut rng));
        }
    }
    Ok(model)
}
