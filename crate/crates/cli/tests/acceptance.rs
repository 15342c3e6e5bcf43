//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a criterion fails that is not listed in
//! `KNOWN_FAILURES`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use myoinr_cli::checkpoint::{encode_checkpoint, load_checkpoint, AnyCheckpoint, Checkpoint};
use myoinr_cli::cli::{Cli, Command};
use myoinr_cli::commands::{
    cmd_ablate, cmd_gradcheck, cmd_strain, cmd_synth, cmd_track, cmd_train, read_predictions,
};
use myoinr_cli::dataset::{read_dataset, write_dataset};
use myoinr_cli::payload::read_array;
use myoinr_core::objective::loss_jacobian;
use myoinr_core::strain::{evaluate_prediction, gcs, grs};
use myoinr_core::synth::{
    analytic_strain, deformation_jacobian, generate_dataset, landmark_trajectories,
    AnalyticDeformation, RadialMode, Span, SynthConfig, TemporalProfile,
};
use myoinr_core::track::{dense_grid_coords, track_landmarks};
use myoinr_core::{normalize_coords, CaseRecord, InrModel, LandmarkGrid, Point, Real};
use tempfile::TempDir;

/// Criteria that fail at this scale, with the measured reason in the README.
const KNOWN_FAILURES: &[&str] = &["4a", "5a", "5b"];

const ALPHAS: [f64; 4] = [0.0, 0.001, 0.01, 0.1];

struct Outcome {
    id: &'static str,
    passed: bool,
}

#[derive(Default)]
struct Report {
    rows: Vec<Outcome>,
}

impl Report {
    fn record(&mut self, id: &'static str, what: &str, passed: bool, detail: String) {
        println!(
            "{} [{id}] {what}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
        self.rows.push(Outcome { id, passed });
    }

    fn info(&self, id: &str, what: &str, detail: String) {
        println!("INFO [{id}] {what}: {detail}");
    }
}

fn command(args: &[&str]) -> Command {
    let argv = std::iter::once("myoinr").chain(args.iter().copied());
    match Cli::try_parse_from(argv) {
        Ok(cli) => cli.command,
        Err(e) => panic!("{args:?}: {e}"),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(out: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", s(out)];
    args.extend_from_slice(extra);
    let Command::Synth(a) = command(&args) else {
        unreachable!()
    };
    cmd_synth(&a).unwrap();
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> myoinr_cli::commands::TrainOutcome {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(extra);
    let Command::Train(a) = command(&args) else {
        unreachable!()
    };
    cmd_train(&a).unwrap()
}

fn files_except_run_config(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run_config.json")
        .map(|e| {
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn annulus_points(case: &CaseRecord) -> Vec<Point> {
    let lm = &case.landmarks;
    let size = case.series.image_size();
    let base = lm.frame(0);
    let mut pts = Vec::new();
    for j in 0..lm.rings() {
        for k in 0..lm.spokes() {
            let a = base.at(j, k);
            pts.push(a);
            let b = base.at(j, (k + 1) % lm.spokes());
            pts.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            if j + 1 < lm.rings() {
                let c = base.at(j + 1, k);
                pts.push([0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1])]);
            }
        }
    }
    normalize_coords(&pts, size).unwrap()
}

fn loss_over_deformation(def: &AnalyticDeformation, points: &[Point], frames: usize) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..frames {
        let t = k as f64 / (frames - 1) as f64;
        let jac: Vec<_> = points
            .iter()
            .map(|&p| deformation_jacobian(def, p, t).unwrap())
            .collect();
        worst = worst.max(loss_jacobian(&jac).unwrap());
    }
    worst
}

fn criterion_gradcheck(report: &mut Report) {
    let start = Instant::now();
    let Command::Gradcheck(a) = command(&["gradcheck"]) else {
        unreachable!()
    };
    let result = cmd_gradcheck(&a);
    let secs = start.elapsed().as_secs_f64();
    let detail = match &result {
        Ok(r) => r
            .checks
            .iter()
            .map(|c| format!("{} {:.1e}/{:.0e}", c.name, c.max_error, c.threshold))
            .collect::<Vec<_>>()
            .join(", "),
        Err(e) => e.to_string(),
    };
    report.record(
        "1",
        "gradient correctness",
        result.is_ok() && secs < 60.0,
        format!("{detail}; {secs:.1} s"),
    );
}

fn criterion_incompressibility(report: &mut Report) {
    let cases = generate_dataset(21, 0, 8, &SynthConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for c in &cases {
        let def = c.ground_truth_deformation.unwrap();
        worst = worst.max(loss_over_deformation(
            &def,
            &annulus_points(c),
            c.series.frame_count(),
        ));
    }
    let thick_cfg = SynthConfig {
        thickening: Some(Span::new(0.2, 0.4)),
        ..SynthConfig::default()
    };
    let thick = generate_dataset(21, 0, 8, &thick_cfg).unwrap();
    let thick_min = thick
        .iter()
        .map(|c| {
            let def = c.ground_truth_deformation.unwrap();
            assert!(matches!(def.mode, RadialMode::WallThickening { .. }));
            loss_over_deformation(&def, &annulus_points(c), c.series.frame_count())
        })
        .fold(f64::INFINITY, f64::min);
    report.record(
        "2",
        "incompressibility oracle",
        worst < 1e-9 && thick_min > 0.0,
        format!("area-preserving max L_J {worst:.2e} (< 1e-9); thickening min L_J {thick_min:.3e} (> 0)"),
    );
}

fn criterion_strain_oracle(report: &mut Report) {
    let cfg = SynthConfig {
        noise_sigma: Span::fixed(0.0),
        ..SynthConfig::default()
    };
    let cases = generate_dataset(33, 0, 8, &cfg).unwrap();
    let mut oracle_err = 0.0f64;
    for c in &cases {
        let def = c.ground_truth_deformation.unwrap();
        let size = c.series.image_size();
        let frames = c.series.frame_count();
        let exact =
            landmark_trajectories(&def, &c.landmarks.repeat_reference(1), frames, size).unwrap();
        let eval = evaluate_prediction(c.id(), 0, &exact, &exact, 1.0).unwrap();
        let k = eval.end_systole_frame;
        let t = k as f64 / (frames - 1) as f64;
        let oracle = analytic_strain(&def, c.landmarks.frame(0), size, t).unwrap();
        oracle_err = oracle_err
            .max((eval.predicted.gcs - oracle.gcs()).abs())
            .max((eval.predicted.grs - oracle.grs()).abs());
        for (a, b) in eval
            .predicted
            .per_pair_circ
            .iter()
            .zip(&oracle.circumferential)
        {
            oracle_err = oracle_err.max((a - b).abs());
        }
        for (a, b) in eval.predicted.per_pair_rad.iter().zip(&oracle.radial) {
            oracle_err = oracle_err.max((a - b).abs());
        }
    }

    let base = cases[0].landmarks.repeat_reference(1);
    let rigid = AnalyticDeformation {
        tau_max: 0.7,
        drift: [0.05, -0.03],
        profile: TemporalProfile::new(0.35, 0.0).unwrap(),
        ..AnalyticDeformation::identity([0.02, -0.01])
    };
    let rigid_traj = landmark_trajectories(&rigid, &base, 20, 128).unwrap();
    let mut rigid_max = 0.0f64;
    for k in 0..20 {
        let (ed, es) = (rigid_traj.frame(0), rigid_traj.frame(k));
        for v in gcs(ed, es)
            .unwrap()
            .pairs
            .into_iter()
            .chain(grs(ed, es).unwrap().pairs)
        {
            rigid_max = rigid_max.max(v.abs());
        }
    }

    let mut scaling_exact = true;
    let mut scaling_dev = 0.0f64;
    for scale in [0.5, 0.8, 2.0] {
        let scaled = base.map_points(|p| [scale * p[0], scale * p[1]]);
        let (ed, es) = (base.frame(0), scaled.frame(0));
        let c = gcs(ed, es).unwrap().value;
        let r = grs(ed, es).unwrap().value;
        if scale == 0.5 || scale == 2.0 {
            scaling_exact &= c == scale - 1.0 && r == scale - 1.0;
        }
        scaling_dev = scaling_dev
            .max((c - (scale - 1.0)).abs())
            .max((r - (scale - 1.0)).abs());
    }
    report.record(
        "3",
        "strain oracle equivalence",
        oracle_err < 1e-9 && rigid_max < 1e-12 && scaling_exact && scaling_dev < 1e-15,
        format!(
            "pipeline vs analytic {oracle_err:.1e} (< 1e-9); rigid max |strain| {rigid_max:.1e} (< 1e-12); \
             scaling s-1 exact at s=0.5,2 and within {scaling_dev:.1e} at s=0.8"
        ),
    );
}

fn with_model<R>(
    path: &Path,
    f: impl FnOnce(&dyn Fn(&LandmarkGrid, &CaseRecord) -> LandmarkGrid) -> R,
) -> R {
    fn run<T: Real>(ck: &Checkpoint<T>, grid: &LandmarkGrid, case: &CaseRecord) -> LandmarkGrid {
        track(&ck.model, grid, case)
    }
    fn track<T: Real>(model: &InrModel<T>, grid: &LandmarkGrid, case: &CaseRecord) -> LandmarkGrid {
        track_landmarks(model, &case.series, grid).unwrap()
    }
    match load_checkpoint(path).unwrap() {
        AnyCheckpoint::F32(ck) => f(&|g, c| run(&ck, g, c)),
        AnyCheckpoint::F64(ck) => f(&|g, c| run(&ck, g, c)),
    }
}

fn criterion_determinism(report: &mut Report, root: &Path) {
    let (a, b) = (root.join("det_a"), root.join("det_b"));
    let synth_args = ["--seed", "9", "--cases", "4"];
    synth(&a, &synth_args);
    synth(&b, &synth_args);
    let datasets_equal = files_except_run_config(&a) == files_except_run_config(&b);

    let (_, cases) = read_dataset(&a).unwrap();
    let copy = root.join("det_copy");
    write_dataset(&copy, &cases, None, None).unwrap();
    let (_, reread) = read_dataset(&copy).unwrap();
    let dataset_roundtrip = cases.len() == reread.len()
        && cases.iter().zip(&reread).all(|(x, y)| {
            x.series.frames() == y.series.frames()
                && x.landmarks == y.landmarks
                && x.ground_truth_deformation == y.ground_truth_deformation
        })
        && files_except_run_config(&copy)
            .iter()
            .filter(|(n, _)| n.ends_with(".bin"))
            .eq(files_except_run_config(&a)
                .iter()
                .filter(|(n, _)| n.ends_with(".bin")));

    let flags = ["--epochs", "2", "--seed", "5"];
    let t1 = train(&a, &root.join("det_t1"), &flags);
    let t1b = train(&a, &root.join("det_t1b"), &flags);
    let mut flags4 = flags.to_vec();
    flags4.extend_from_slice(&["--workers", "4"]);
    let t4 = train(&a, &root.join("det_t4"), &flags4);
    let ck1 = fs::read(&t1.checkpoint).unwrap();
    let checkpoints_equal = ck1 == fs::read(&t1b.checkpoint).unwrap();

    let ckpt_roundtrip = match load_checkpoint(&t1.checkpoint).unwrap() {
        AnyCheckpoint::F32(c) => encode_checkpoint(&c.model, c.training.as_ref()) == ck1,
        AnyCheckpoint::F64(c) => encode_checkpoint(&c.model, c.training.as_ref()) == ck1,
    };

    let mut loss_rel = 0.0f64;
    for (x, y) in t1.history.iter().zip(&t4.history) {
        for (p, q) in [
            (x.pos, y.pos),
            (x.jac, y.jac),
            (x.latent, y.latent),
            (x.total, y.total),
        ] {
            loss_rel = loss_rel.max((p - q).abs() / p.abs().max(1e-300));
        }
    }
    let losses_agree = t1.history.len() == t4.history.len() && loss_rel <= 1e-6;
    report.record(
        "6",
        "determinism and round-trips",
        datasets_equal && dataset_roundtrip && checkpoints_equal && ckpt_roundtrip && losses_agree,
        format!(
            "datasets bitwise {datasets_equal}; dataset round-trip {dataset_roundtrip}; checkpoints bitwise \
             {checkpoints_equal}; checkpoint round-trip {ckpt_roundtrip}; loss 1 vs 4 workers rel diff {loss_rel:.1e}"
        ),
    );
}

fn nearest_node(v: f64, resolution: usize, image_size: usize) -> usize {
    let step = (image_size - 1) as f64 / (resolution - 1) as f64;
    ((v / step).round() as usize).min(resolution - 1)
}

fn criterion_dense(report: &mut Report, root: &Path, model: &Path, eval: &Path) {
    let (manifest, cases) = read_dataset(eval).unwrap();
    let case = &cases[0];
    let size = case.series.image_size();
    let frames = [0usize, 7, 19];
    let out = root.join("dense");
    let Command::Track(a) = command(&[
        "track",
        "--model",
        s(model),
        "--data",
        s(eval),
        "--case",
        &manifest.cases[0].id,
        "--resolution",
        "32",
        "--resolution",
        "128",
        "--resolution",
        "512",
        "--frames",
        "0,7,19",
        "--out",
        s(&out),
    ]) else {
        unreachable!()
    };
    let start = Instant::now();
    let tracked = cmd_track(&a);
    let secs = start.elapsed().as_secs_f64();
    let Ok(pred) = tracked else {
        report.record(
            "7",
            "arbitrary-resolution contract",
            false,
            format!("{:?}", tracked.err()),
        );
        return;
    };
    let entry = &pred.cases[0];

    let mut worst = 0.0f64;
    let mut shapes_ok = true;
    for dense in &entry.dense {
        let r = dense.resolution;
        let (dims, values) = read_array(&out.join(&dense.displacements.file)).unwrap();
        shapes_ok &= dims == [frames.len(), r, r, 2];
        let grid = dense_grid_coords(r, size).unwrap();
        let nodes: Vec<(usize, usize)> = case
            .landmarks
            .points(0)
            .iter()
            .map(|p| (nearest_node(p[0], r, size), nearest_node(p[1], r, size)))
            .collect();
        let snapped: Vec<Point> = nodes.iter().map(|&(ix, iy)| grid[iy * r + ix]).collect();
        let reference = LandmarkGrid::new(
            case.landmarks.rings(),
            case.landmarks.spokes(),
            vec![snapped],
        )
        .unwrap();
        let landmark_mode = with_model(model, |run| run(&reference, case));
        for (fi, &k) in frames.iter().enumerate() {
            for (i, &(ix, iy)) in nodes.iter().enumerate() {
                let at = ((fi * r + iy) * r + ix) * 2;
                let moved = landmark_mode.points(k)[i];
                let base = reference.points(0)[i];
                worst = worst
                    .max((values[at] as f64 - (moved[0] - base[0])).abs())
                    .max((values[at + 1] as f64 - (moved[1] - base[1])).abs());
            }
        }
    }

    // Landmark mode end to end: landmarks on pixel centers, compared with the
    // native-resolution dense field through the written files.
    let snapped_data = root.join("dense_pixels");
    let mut pixel_case = case.clone();
    pixel_case.landmarks = case.landmarks.map_points(|p| [p[0].round(), p[1].round()]);
    write_dataset(&snapped_data, std::slice::from_ref(&pixel_case), None, None).unwrap();
    let lm_out = root.join("dense_landmarks");
    let Command::Track(a) = command(&[
        "track",
        "--model",
        s(model),
        "--data",
        s(&snapped_data),
        "--out",
        s(&lm_out),
    ]) else {
        unreachable!()
    };
    let lm_pred = cmd_track(&a).unwrap();
    let (_, disp) = read_array(&lm_out.join(&lm_pred.cases[0].displacements.file)).unwrap();
    let native = entry.dense.iter().find(|d| d.resolution == size).unwrap();
    let (_, dense) = read_array(&out.join(&native.displacements.file)).unwrap();
    let base = pixel_case.landmarks.points(0);
    let mut worst_files = 0.0f64;
    for (fi, &k) in frames.iter().enumerate() {
        for (i, p) in base.iter().enumerate() {
            let cell = ((fi * size + p[1] as usize) * size + p[0] as usize) * 2;
            let at = (k * base.len() + i) * 2;
            worst_files = worst_files
                .max((dense[cell] - disp[at]).abs() as f64)
                .max((dense[cell + 1] - disp[at + 1]).abs() as f64);
        }
    }
    report.record(
        "7",
        "arbitrary-resolution contract",
        shapes_ok && worst < 1e-6 && worst_files < 1e-6,
        format!(
            "R=32,128,512 written in {secs:.1} s; dense vs landmark mode max diff {worst:.1e} px on grid nodes, \
             {worst_files:.1e} px through files at R=128 (< 1e-6)"
        ),
    );
}

fn criterion_throughput(report: &Report, model: &Path, eval: &Path) {
    let (_, cases) = read_dataset(eval).unwrap();
    let mut times: Vec<f64> = with_model(model, |run| {
        run(&cases[0].landmarks, &cases[0]);
        cases
            .iter()
            .map(|c| {
                let start = Instant::now();
                run(&c.landmarks, c);
                start.elapsed().as_secs_f64()
            })
            .collect()
    });
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    report.info(
        "8",
        "throughput",
        format!(
            "single-slice landmark inference median {:.1} ms over {} slices ({:.1} slices/s, one CPU thread; \
             target < 100 ms)",
            1e3 * median,
            times.len(),
            1.0 / median
        ),
    );
}

fn main() {
    std::env::remove_var(myoinr_cli::cli::PRECISION_ENV);
    let mut report = Report::default();
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let total = Instant::now();

    criterion_gradcheck(&mut report);
    criterion_incompressibility(&mut report);
    criterion_strain_oracle(&mut report);
    criterion_determinism(&mut report, root);

    let train_dir = root.join("train");
    let eval_dir = root.join("heldout");
    synth(&train_dir, &["--seed", "1", "--cases", "64"]);
    synth(
        &eval_dir,
        &["--seed", "1", "--first-case", "10000", "--cases", "16"],
    );

    let start = Instant::now();
    let ablate_out = root.join("ablate");
    let alphas = ALPHAS.map(|a| a.to_string()).join(",");
    let Command::Ablate(a) = command(&[
        "ablate",
        "--data",
        s(&train_dir),
        "--eval",
        s(&eval_dir),
        "--alphas",
        &alphas,
        "--save-models",
        "--out",
        s(&ablate_out),
    ]) else {
        unreachable!()
    };
    let sweep = cmd_ablate(&a).unwrap();
    let sweep_secs = start.elapsed().as_secs_f64();
    let model: PathBuf = sweep.models[1].clone();

    let pred_dir = root.join("pred");
    let Command::Track(t) = command(&[
        "track",
        "--model",
        s(&model),
        "--data",
        s(&eval_dir),
        "--out",
        s(&pred_dir),
    ]) else {
        unreachable!()
    };
    cmd_track(&t).unwrap();
    assert_eq!(read_predictions(&pred_dir).unwrap().cases.len(), 16);
    let Command::Strain(st) = command(&[
        "strain",
        "--pred",
        s(&pred_dir),
        "--ref",
        s(&eval_dir),
        "--out",
        s(&root.join("strain")),
    ]) else {
        unreachable!()
    };
    let strain = cmd_strain(&st).unwrap();
    let (_, eval_cases) = read_dataset(&eval_dir).unwrap();
    let spacing = eval_cases[0].series.pixel_spacing_mm;
    let rmse = strain.summary.point_error_mm;
    let baseline = strain.baseline.point_error_mm;
    let ratio = baseline / rmse;
    let gcs_error = strain.summary.gcs_agreement.error;
    report.record(
        "4a",
        "held-out point RMSE at least 3x below zero-displacement baseline",
        ratio >= 3.0,
        format!("RMSE {rmse:.3} mm vs baseline {baseline:.3} mm, ratio {ratio:.2} (need >= 3)"),
    );
    report.record(
        "4b",
        "held-out point RMSE below 2 px",
        rmse / spacing < 2.0,
        format!("{:.3} px", rmse / spacing),
    );
    report.record(
        "4c",
        "held-out GCS error below 5 percentage points",
        gcs_error < 5.0,
        format!(
            "{gcs_error:.2} pp (GCS {:.2}% vs analytic {:.2}%); sweep of {} models took {:.1} min",
            100.0 * strain.summary.gcs,
            100.0 * strain.summary.gcs_reference,
            ALPHAS.len(),
            sweep_secs / 60.0
        ),
    );

    let rows = &sweep.rows;
    let errors: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3}", r.point_error))
        .collect();
    let biases: Vec<String> = rows.iter().map(|r| format!("{:+.2}", r.grs_bias)).collect();
    let nondecreasing = rows
        .windows(2)
        .all(|w| w[1].point_error >= w[0].point_error);
    let bias_up = rows.last().unwrap().grs_bias > rows[0].grs_bias;
    report.record(
        "5a",
        "ablation: point error non-decreasing in alpha",
        nondecreasing,
        format!("alpha {alphas}: point error {} mm", errors.join(", ")),
    );
    report.record(
        "5b",
        "ablation: GRS bias moves positive as alpha grows",
        bias_up,
        format!("GRS bias {} pp", biases.join(", ")),
    );

    criterion_dense(&mut report, root, &model, &eval_dir);
    criterion_throughput(&report, &model, &eval_dir);

    let unexpected: Vec<&str> = report
        .rows
        .iter()
        .filter(|o| !o.passed && !KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let recovered: Vec<&str> = report
        .rows
        .iter()
        .filter(|o| o.passed && KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = report.rows.iter().filter(|o| o.passed).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1} min; known failures: {}",
        report.rows.len(),
        total.elapsed().as_secs_f64() / 60.0,
        KNOWN_FAILURES.join(", ")
    );
    if !recovered.is_empty() {
        println!(
            "note: listed as known failures but passed: {}",
            recovered.join(", ")
        );
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
