//! Supervised training of the conditioned network.
//!
//! One epoch visits every `(case, target frame t > 0)` pair once in an order
//! shuffled from `(seed, epoch)`. Each batch element encodes `(I_0, I_t)`,
//! evaluates the network at the reference landmarks, and contributes the
//! position, Jacobian and latent terms; the batch mean drives one Adam step.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, OptimizerState};
use super::losses::LossWeights;
use crate::coords::{normalize_point, normalize_time, Point};
use crate::diffnet::{
    init_model, loss_gradients, InrModel, LossParts, ModelConfig, SupervisionSample,
};
use crate::real::Real;
use crate::series::CaseRecord;
use crate::{Error, Result};

/// Where the Jacobian term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSamplePolicy {
    /// The reference landmarks themselves.
    SupervisionPoints,
    /// Fresh uniform samples of the myocardial annulus spanned by the
    /// reference landmarks, as many as there are landmarks.
    RandomInterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub omega: f64,
    pub jacobian_sample_policy: JacobianSamplePolicy,
    /// Network sizes; its `omega` is replaced by [`TrainConfig::omega`].
    pub architecture: ModelConfig,
    /// Keep a per-batch loss log in addition to epoch means.
    pub log_batches: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 4,
            epochs: 14,
            seed: 0,
            weights: LossWeights::default(),
            omega: 15.0,
            jacobian_sample_policy: JacobianSamplePolicy::SupervisionPoints,
            architecture: ModelConfig::default(),
            log_batches: false,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            omega: self.omega,
            ..self.architecture.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        LossWeights::new(self.weights.alpha, self.weights.beta)?;
        self.model_config().validate()
    }
}

/// Sample-weighted mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub pos: f64,
    pub jac: f64,
    pub latent: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLoss {
    pub epoch: usize,
    pub batch: usize,
    pub parts: LossParts,
    pub total: f64,
}

/// Stream-separated seed derivation (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const INTERIOR_STREAM: u64 = 0x494E_5452;

struct PreparedCase {
    /// Normalized landmarks per frame.
    frames: Vec<Vec<Point>>,
    times: Vec<f64>,
    center: Point,
    r_inner: f64,
    r_outer: f64,
}

fn prepare(dataset: &[CaseRecord], image_size: usize) -> Result<Vec<PreparedCase>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    dataset
        .iter()
        .map(|case| {
            let fc = case.series.frame_count();
            if fc < 2 {
                return Err(Error::InvalidArgument(format!(
                    "case {} has {fc} frame(s); need at least 2",
                    case.id()
                )));
            }
            if case.series.image_size() != image_size {
                return Err(Error::ShapeMismatch(format!(
                    "case {} has {0}x{0} frames, model expects {image_size}x{image_size}",
                    case.series.image_size()
                )));
            }
            let frames: Vec<Vec<Point>> = case
                .landmarks
                .frames()
                .iter()
                .map(|f| f.iter().map(|&p| normalize_point(p, image_size)).collect())
                .collect();
            let reference = &frames[0];
            let n = reference.len() as f64;
            let center = [
                reference.iter().map(|p| p[0]).sum::<f64>() / n,
                reference.iter().map(|p| p[1]).sum::<f64>() / n,
            ];
            let radii = reference
                .iter()
                .map(|p| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt());
            let (r_inner, r_outer) = radii.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
            let times = (0..fc)
                .map(|k| normalize_time(k, fc))
                .collect::<Result<Vec<_>>>()?;
            Ok(PreparedCase {
                frames,
                times,
                center,
                r_inner,
                r_outer,
            })
        })
        .collect()
}

/// Incremental trainer; owns the model and optimizer state between epochs.
pub struct Trainer<'d, T: Real> {
    config: TrainConfig,
    data: &'d [CaseRecord],
    prepared: Vec<PreparedCase>,
    model: InrModel<T>,
    optimizer: OptimizerState<T>,
    epoch: usize,
    history: Vec<EpochLoss>,
    batch_log: Vec<BatchLoss>,
}

impl<'d, T: Real> Trainer<'d, T> {
    pub fn new(dataset: &'d [CaseRecord], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = init_model::<T>(config.seed, config.model_config())?;
        Self::resume(dataset, config, model, None, 0, Vec::new())
    }

    /// Continues from saved state; `optimizer = None` starts fresh moments.
    pub fn resume(
        dataset: &'d [CaseRecord],
        config: TrainConfig,
        model: InrModel<T>,
        optimizer: Option<OptimizerState<T>>,
        epoch: usize,
        history: Vec<EpochLoss>,
    ) -> Result<Self> {
        config.validate()?;
        if model.config() != &config.model_config() {
            return Err(Error::InvalidArgument(
                "model architecture does not match the training configuration".into(),
            ));
        }
        let prepared = prepare(dataset, model.config().image_size)?;
        let optimizer = optimizer.unwrap_or_else(|| OptimizerState::new(model.param_count()));
        if optimizer.m.len() != model.param_count() {
            return Err(Error::ShapeMismatch(
                "optimizer state does not match model parameter count".into(),
            ));
        }
        Ok(Self {
            config,
            data: dataset,
            prepared,
            model,
            optimizer,
            epoch,
            history,
            batch_log: Vec::new(),
        })
    }

    pub fn model(&self) -> &InrModel<T> {
        &self.model
    }

    pub fn optimizer(&self) -> &OptimizerState<T> {
        &self.optimizer
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn history(&self) -> &[EpochLoss] {
        &self.history
    }

    pub fn batch_log(&self) -> &[BatchLoss] {
        &self.batch_log
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn into_parts(self) -> (InrModel<T>, OptimizerState<T>, Vec<EpochLoss>) {
        (self.model, self.optimizer, self.history)
    }

    /// `(case, frame)` visiting order of `epoch`.
    pub fn epoch_order(&self, epoch: usize) -> Vec<(usize, usize)> {
        epoch_order(&self.prepared, self.config.seed, epoch)
    }

    fn interior_points(&self, case: &PreparedCase, epoch: usize, item: usize) -> Vec<Point> {
        let stream = INTERIOR_STREAM ^ ((epoch as u64) << 32) ^ item as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, stream));
        let (lo, hi) = (case.r_inner.powi(2), case.r_outer.powi(2));
        (0..case.frames[0].len())
            .map(|_| {
                let r = rng.random_range(lo..=hi).sqrt();
                let th = rng.random_range(0.0..std::f64::consts::TAU);
                [case.center[0] + r * th.cos(), case.center[1] + r * th.sin()]
            })
            .collect()
    }

    /// Runs one epoch and returns its mean losses.
    pub fn run_epoch(&mut self) -> Result<EpochLoss> {
        let epoch = self.epoch;
        let order = self.epoch_order(epoch);
        let mut sums = LossParts::default();
        let mut total_sum = 0.0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<SupervisionSample<'_>> = chunk
                .iter()
                .enumerate()
                .map(|(i, &(c, f))| {
                    let case = &self.prepared[c];
                    let series = &self.data[c].series;
                    let jacobian_points = match self.config.jacobian_sample_policy {
                        JacobianSamplePolicy::SupervisionPoints => None,
                        JacobianSamplePolicy::RandomInterior => {
                            Some(self.interior_points(case, epoch, b * self.config.batch_size + i))
                        }
                    };
                    SupervisionSample {
                        reference: series.frame(0),
                        target: series.frame(f),
                        t: case.times[f],
                        points: case.frames[0].clone(),
                        targets: case.frames[f].clone(),
                        jacobian_points,
                    }
                })
                .collect();
            let bundle = loss_gradients(&self.model, &batch, self.config.weights)?;
            adam_step(
                self.model.params_mut(),
                &bundle.grads,
                &mut self.optimizer,
                self.config.learning_rate,
                None,
            )
            .map_err(|e| match e {
                Error::NonFiniteGradient(_) => {
                    let i = bundle
                        .grads
                        .iter()
                        .position(|g| !g.is_finite())
                        .unwrap_or(0);
                    let name = self
                        .model
                        .layout()
                        .block_of(i)
                        .map(|b| b.name.clone())
                        .unwrap_or_default();
                    Error::NonFiniteGradient(name)
                }
                other => other,
            })?;
            let n = chunk.len() as f64;
            sums.pos += bundle.parts.pos * n;
            sums.jac += bundle.parts.jac * n;
            sums.latent += bundle.parts.latent * n;
            total_sum += bundle.loss * n;
            if self.config.log_batches {
                self.batch_log.push(BatchLoss {
                    epoch,
                    batch: b,
                    parts: bundle.parts,
                    total: bundle.loss,
                });
            }
        }
        let n = order.len() as f64;
        let record = EpochLoss {
            epoch,
            pos: sums.pos / n,
            jac: sums.jac / n,
            latent: sums.latent / n,
            total: total_sum / n,
        };
        self.history.push(record);
        self.epoch += 1;
        Ok(record)
    }

    /// Runs epochs until `config.epochs` have completed.
    pub fn run(&mut self) -> Result<&[EpochLoss]> {
        while self.epoch < self.config.epochs {
            self.run_epoch()?;
        }
        Ok(&self.history)
    }
}

fn epoch_order(prepared: &[PreparedCase], seed: u64, epoch: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(c, p)| (1..p.frames.len()).map(move |f| (c, f)))
        .collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM ^ ((epoch as u64) << 16)));
    order.shuffle(&mut rng);
    order
}

/// Trains a fresh model for `config.epochs` epochs.
pub fn train<T: Real>(
    dataset: &[CaseRecord],
    config: &TrainConfig,
) -> Result<(InrModel<T>, Vec<EpochLoss>)> {
    let mut trainer = Trainer::<T>::new(dataset, config.clone())?;
    trainer.run()?;
    let (model, _, history) = trainer.into_parts();
    Ok((model, history))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
