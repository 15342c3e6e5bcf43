//! The conditioned displacement network and its differentiation engine.
//!
//! `u = f(X, t, Z)` with `Z = E(I_0, I_t)` from a strided CNN and per-layer
//! amplitudes `a_i = M_i(Z)` modulating a sine MLP. Input Jacobians are exact
//! (forward-mode tangents through the MLP) and loss gradients traverse those
//! tangent computations in reverse, so the Jacobian-determinant penalty is
//! differentiated exactly.

mod config;
mod encoder;
mod engine;
pub mod gradcheck;
mod mlp;
mod model;
mod modulation;

pub use config::{
    BlockRole, ModelConfig, ParamBlock, ParamLayout, ENCODER_INPUT_CHANNELS, INPUT_DIM, KERNEL,
    OUTPUT_DIM, STRIDE,
};
pub use encoder::encode;
pub use engine::{
    condition, displace, forward, input_jacobian, loss_gradients, loss_gradients_terms, loss_parts,
    DisplacementResult, GradientBundle, LossParts, SupervisionSample, TermWeights,
};
pub use model::{init_model, InrModel};
pub use modulation::{modulate, Conditioning};
