//! Finite-difference verification of the analytic derivatives.
//!
//! The oracles here only ever call forward evaluations (`forward`,
//! `loss_parts`); they never touch the tangent or reverse code they check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::ModelConfig;
use super::engine::{
    forward, input_jacobian, loss_gradients_terms, loss_parts, SupervisionSample, TermWeights,
};
use super::model::{init_model, InrModel};
use crate::coords::Point;
use crate::series::Image;
use crate::Result;

pub const JACOBIAN_STEP: f64 = 1e-5;
pub const JACOBIAN_TOLERANCE: f64 = 1e-6;
pub const PARAM_STEP: f64 = 1e-5;
pub const PARAM_TOLERANCE: f64 = 1e-4;
pub const LINEARITY_TOLERANCE: f64 = 1e-12;
/// Gradient entries below this magnitude are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Deliberate perturbations of the analytic results, used to show the harness
/// detects wrong derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    InputJacobian,
    ParamGradient,
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub jacobian_draws: usize,
    pub config: ModelConfig,
    pub points_per_sample: usize,
    pub batch: usize,
    pub alpha: f64,
    pub beta: f64,
    pub corruption: Option<Corruption>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            jacobian_draws: 100,
            config: ModelConfig::tiny(),
            points_per_sample: 6,
            batch: 2,
            alpha: 0.7,
            beta: 0.4,
            corruption: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub param_count: usize,
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, max_error: f64, threshold: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        max_error,
        threshold,
        passed: max_error.is_finite() && max_error < threshold,
    }
}

/// Random model with every parameter (biases included) nonzero.
fn random_model(seed: u64, config: ModelConfig) -> Result<InrModel<f64>> {
    let mut model = init_model::<f64>(seed, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5);
    for block in model.layout().blocks().to_vec() {
        if block.name.ends_with("bias") {
            for p in &mut model.params_mut()[block.range()] {
                *p = rng.random_range(-0.1..0.1);
            }
        }
    }
    Ok(model)
}

fn random_image(size: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::new(
        size,
        (0..size * size)
            .map(|_| rng.random_range(0.0f32..=1.0))
            .collect(),
    )
    .expect("valid random image")
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)]
}

/// Max abs error between the analytic `dX'/dX` and central differences of
/// `X + f(X)`, over random models, points, times and latent codes.
pub fn check_input_jacobian(opts: &GradcheckOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    for draw in 0..opts.jacobian_draws {
        let model = random_model(
            opts.seed.wrapping_mul(1000).wrapping_add(draw as u64),
            opts.config.clone(),
        )?;
        let z: Vec<f64> = (0..opts.config.latent_size)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let x = random_point(&mut rng);
        let t = rng.random_range(0.0..=1.0);
        let mut analytic = input_jacobian(&model, x, t, &z)?;
        if opts.corruption == Some(Corruption::InputJacobian) {
            analytic[0][0] += 1e-3;
        }
        let h = JACOBIAN_STEP;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let up = forward(&model, xp, t, &z)?.u;
            let um = forward(&model, xm, t, &z)?.u;
            for r in 0..2 {
                let fd = (xp[r] + up[r] - (xm[r] + um[r])) / (2.0 * h);
                worst = worst.max((analytic[r][d] - fd).abs());
            }
        }
    }
    Ok(worst)
}

struct GradFixture {
    images: Vec<(Image, Image)>,
    samples: Vec<(f64, Vec<Point>, Vec<Point>)>,
}

impl GradFixture {
    fn new(opts: &GradcheckOptions) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xF1C5);
        let size = opts.config.image_size;
        let mut images = Vec::new();
        let mut samples = Vec::new();
        for _ in 0..opts.batch {
            images.push((random_image(size, &mut rng), random_image(size, &mut rng)));
            let pts: Vec<Point> = (0..opts.points_per_sample)
                .map(|_| random_point(&mut rng))
                .collect();
            let targets = pts
                .iter()
                .map(|p| {
                    [
                        p[0] + rng.random_range(-0.2..0.2),
                        p[1] + rng.random_range(-0.2..0.2),
                    ]
                })
                .collect();
            samples.push((rng.random_range(0.05..=1.0), pts, targets));
        }
        Self { images, samples }
    }

    fn batch(&self) -> Vec<SupervisionSample<'_>> {
        self.images
            .iter()
            .zip(&self.samples)
            .map(|((i0, it), (t, pts, tg))| SupervisionSample {
                reference: i0,
                target: it,
                t: *t,
                points: pts.clone(),
                targets: tg.clone(),
                jacobian_points: None,
            })
            .collect()
    }
}

/// Componentwise relative error with an absolute floor.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(RELATIVE_FLOOR))
        .fold(0.0, f64::max)
}

/// Central differences of the weighted loss over every parameter.
pub fn numeric_gradient(
    model: &InrModel<f64>,
    batch: &[SupervisionSample<'_>],
    weights: TermWeights,
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(model.param_count());
    let with_jac = weights.jac != 0.0;
    for i in 0..model.param_count() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + step;
        let lp = loss_parts(&probe, batch, with_jac)?.weighted(weights);
        probe.params_mut()[i] = orig - step;
        let lm = loss_parts(&probe, batch, with_jac)?.weighted(weights);
        probe.params_mut()[i] = orig;
        out.push((lp - lm) / (2.0 * step));
    }
    Ok(out)
}

/// Runs every check and collects the results.
pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut checks = Vec::new();
    checks.push(check(
        "input_jacobian_abs",
        check_input_jacobian(opts)?,
        JACOBIAN_TOLERANCE,
    ));

    let model = random_model(opts.seed, opts.config.clone())?;
    let fixture = GradFixture::new(opts);
    let batch = fixture.batch();
    let terms = [
        (
            "grad_position",
            TermWeights {
                pos: 1.0,
                jac: 0.0,
                latent: 0.0,
            },
        ),
        (
            "grad_jacobian",
            TermWeights {
                pos: 0.0,
                jac: 1.0,
                latent: 0.0,
            },
        ),
        (
            "grad_latent",
            TermWeights {
                pos: 0.0,
                jac: 0.0,
                latent: 1.0,
            },
        ),
        (
            "grad_total",
            TermWeights {
                pos: 1.0,
                jac: opts.alpha,
                latent: opts.beta,
            },
        ),
    ];
    let mut analytic_terms = Vec::new();
    for (name, w) in terms {
        let mut analytic = loss_gradients_terms(&model, &batch, w)?.grads;
        if opts.corruption == Some(Corruption::ParamGradient) {
            analytic[0] += 1e-3 * analytic[0].abs().max(1.0);
        }
        let numeric = numeric_gradient(&model, &batch, w, PARAM_STEP)?;
        checks.push(check(
            name,
            relative_error(&analytic, &numeric),
            PARAM_TOLERANCE,
        ));
        analytic_terms.push(analytic);
    }

    // Gradient of the weighted sum equals the weighted sum of gradients.
    let combined: Vec<f64> = (0..model.param_count())
        .map(|i| {
            analytic_terms[0][i]
                + opts.alpha * analytic_terms[1][i]
                + opts.beta * analytic_terms[2][i]
        })
        .collect();
    let scale = combined.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let linearity = combined
        .iter()
        .zip(&analytic_terms[3])
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max);
    checks.push(check("total_linearity", linearity, LINEARITY_TOLERANCE));

    Ok(GradcheckReport {
        seed: opts.seed,
        param_count: model.param_count(),
        checks,
    })
}
