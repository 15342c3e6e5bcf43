use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use myoinr_core::diffnet::ModelConfig;
use myoinr_core::objective::{JacobianSamplePolicy, LossWeights};
use myoinr_core::synth::Span;
use myoinr_core::{Precision, TrainConfig};

use crate::error::{CliError, CliResult};

pub const PRECISION_ENV: &str = "MYOINR_PRECISION";

#[derive(Debug, Parser)]
#[command(
    name = "myoinr",
    version,
    about = "Myocardial motion tracking with conditioned sine networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic tagged dataset with analytic ground truth.
    Synth(SynthArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Predict landmark trajectories and dense displacement fields.
    Track(TrackArgs),
    /// Strain and point-error reports for predicted landmarks.
    Strain(StrainArgs),
    /// Finite-difference verification of input Jacobians and loss gradients.
    Gradcheck(GradcheckArgs),
    /// Train one model per Jacobian weight and tabulate the results.
    Ablate(AblateArgs),
}

fn parse_span(s: &str) -> Result<Span, String> {
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    match s.split_once(':') {
        Some((a, b)) => Ok(Span::new(parse(a)?, parse(b)?)),
        None => Ok(Span::fixed(parse(s)?)),
    }
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: myoinr_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ExecArgs {
    /// Arithmetic mode.
    #[arg(long, env = PRECISION_ENV, default_value = "f32", value_parser = parse_precision)]
    pub precision: Precision,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub cases: usize,
    /// Index of the first generated case; ids continue from here.
    #[arg(long, default_value_t = 0)]
    pub first_case: u64,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value_t = 128)]
    pub image_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Mid-wall radius shrink at end-systole, `MIN:MAX` or a single value.
    #[arg(long, value_parser = parse_span)]
    pub shrink: Option<Span>,
    /// Peak twist in radians.
    #[arg(long, value_parser = parse_span)]
    pub twist: Option<Span>,
    /// Peak drift magnitude, normalized units.
    #[arg(long, value_parser = parse_span)]
    pub drift: Option<Span>,
    /// End-systolic time as a fraction of the cycle.
    #[arg(long, value_parser = parse_span)]
    pub t_es: Option<Span>,
    #[arg(long, value_parser = parse_span)]
    pub noise: Option<Span>,
    #[arg(long, value_parser = parse_span)]
    pub tag_spacing: Option<Span>,
    /// Use the wall-thickening (not area-preserving) map with this thickening range.
    #[arg(long, value_parser = parse_span)]
    pub thickening: Option<Span>,
    /// Zero all motion amplitudes.
    #[arg(long)]
    pub motionless: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JacobianPoints {
    Supervision,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Architecture {
    /// Three hidden layers of 256, latent 32, 128x128 input.
    Full,
    /// Two hidden layers of 8 on 32x32 images.
    Tiny,
}

/// Training hyperparameters; omitted flags keep the base configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Weight of the Jacobian-determinant penalty [default: 0.001].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the latent-norm penalty [default: 0.0001].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sine frequency [default: 15].
    #[arg(long)]
    pub omega: Option<f64>,
    /// Adam learning rate [default: 0.0001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Image pairs per step [default: 4].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Passes over every (case, frame) pair [default: 14].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initialization and shuffling seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where the Jacobian penalty is evaluated [default: supervision].
    #[arg(long, value_enum)]
    pub jacobian_points: Option<JacobianPoints>,
    #[arg(long, value_enum)]
    pub architecture: Option<Architecture>,
    /// Also record per-batch losses.
    #[arg(long)]
    pub log_batches: bool,
}

impl TrainFlags {
    pub fn apply(&self, mut cfg: TrainConfig) -> CliResult<TrainConfig> {
        if let Some(a) = self.architecture {
            cfg.architecture = match a {
                Architecture::Full => ModelConfig::default(),
                Architecture::Tiny => ModelConfig::tiny(),
            };
        }
        let alpha = self.alpha.unwrap_or(cfg.weights.alpha);
        let beta = self.beta.unwrap_or(cfg.weights.beta);
        cfg.weights = LossWeights::new(alpha, beta).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(v) = self.omega {
            cfg.omega = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.batch {
            cfg.batch_size = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(p) = self.jacobian_points {
            cfg.jacobian_sample_policy = match p {
                JacobianPoints::Supervision => JacobianSamplePolicy::SupervisionPoints,
                JacobianPoints::Interior => JacobianSamplePolicy::RandomInterior,
            };
        }
        cfg.log_batches |= self.log_batches;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Write a resumable checkpoint every N epochs (0: final only).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Continue from a resumable checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict to these case ids (repeatable).
    #[arg(long = "case")]
    pub cases: Vec<String>,
    /// Also sample dense displacement fields on an R x R grid (repeatable).
    #[arg(long = "resolution")]
    pub resolutions: Vec<usize>,
    /// Frames for dense fields, comma separated; default all.
    #[arg(long, value_delimiter = ',')]
    pub frames: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StrainArgs {
    /// Output directory of `track`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference dataset directory.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Pixel spacing in mm; default from the dataset manifest.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Skip the end-systolic overlay images.
    #[arg(long)]
    pub no_overlays: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradcheckSize {
    Tiny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorruptionArg {
    Jacobian,
    Gradient,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "tiny")]
    pub size: GradcheckSize,
    /// Random draws for the input-Jacobian check.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Write the report as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturb an analytic result to exercise the harness.
    #[arg(long, value_enum, hide = true)]
    pub corrupt: Option<CorruptionArg>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out dataset; defaults to the training set.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Jacobian weights, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Keep each trained model as `alpha_<value>.ckpt`.
    #[arg(long)]
    pub save_models: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub exec: ExecArgs,
}
