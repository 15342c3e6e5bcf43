//! Synthetic tagged short-axis cases with closed-form ground truth.

mod deformation;
mod generate;
mod oracle;
mod render;

pub use deformation::{
    deform_point, deformation_jacobian, inverse_deform_point, AnalyticDeformation, RadialMode,
    TemporalProfile,
};
pub use generate::{generate_case, generate_dataset, landmark_trajectories, Span, SynthConfig};
pub use oracle::{analytic_strain, AnalyticStrain};
pub use render::{render_frame, Geometry, TagPattern};
