//! Latent-conditioned implicit neural representations of myocardial motion.
//!
//! A convolutional encoder summarizes an image pair `(I_0, I_t)` into a latent
//! code, modulation networks turn the code into per-layer amplitudes, and a
//! sine MLP maps a material point `(x, y)` and time `t` to its displacement.
//! The crate also carries the training objective, a synthetic tagging
//! generator with analytic ground truth, and strain metrics.

pub mod coords;
pub mod diffnet;
mod error;
pub mod landmarks;
pub mod objective;
pub mod real;
pub mod series;
pub mod strain;
pub mod synth;
pub mod track;

pub use coords::{denormalize_coords, normalize_coords, NormalizedCoord, Point};
pub use diffnet::{InrModel, ModelConfig};
pub use error::{Error, Result};
pub use landmarks::{make_landmark_grid, GridFrame, LandmarkGrid};
pub use objective::{LossWeights, TrainConfig};
pub use real::{Precision, Real};
pub use series::{CaseRecord, Image, TagFrameSeries};
