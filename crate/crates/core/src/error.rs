use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "topology mismatch: expected {expected_rings}x{expected_spokes}, got {rings}x{spokes}"
    )]
    TopologyMismatch {
        expected_rings: usize,
        expected_spokes: usize,
        rings: usize,
        spokes: usize,
    },

    #[error("point inside collapse radius (r^2 = {r_sq:.6e} < k = {k:.6e})")]
    CollapseRadius { r_sq: f64, k: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
