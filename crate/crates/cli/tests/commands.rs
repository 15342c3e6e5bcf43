use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use myoinr_cli::checkpoint::{load_checkpoint, read_header, AnyCheckpoint};
use myoinr_cli::cli::TrainFlags;
use myoinr_cli::commands::{
    read_predictions, PredictionEntry, PredictionManifest, PREDICTIONS_FILE,
};
use myoinr_cli::dataset::{read_dataset, write_dataset, write_json, FileRef};
use myoinr_cli::payload::{read_array, to_f32, write_array};
use myoinr_cli::report::parse_csv;
use myoinr_core::synth::{generate_dataset, SynthConfig};
use myoinr_core::{Precision, TrainConfig};
use tempfile::TempDir;

fn myoinr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoinr"))
        .args(args)
        .env_remove("MYOINR_PRECISION")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = myoinr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_dataset(root: &Path, name: &str) -> PathBuf {
    let dir = root.join(name);
    ok(&[
        "synth",
        "--seed",
        "4",
        "--cases",
        "3",
        "--frames",
        "4",
        "--image-size",
        "32",
        "--out",
        s(&dir),
    ]);
    dir
}

fn tiny_train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--data",
        s(data),
        "--out",
        s(out),
        "--architecture",
        "tiny",
    ];
    args.extend_from_slice(extra);
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "2"]);
    }
    ok(&args)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_and_counts_cases() {
    let tmp = TempDir::new().unwrap();
    let a = tiny_dataset(tmp.path(), "a");
    let b = tiny_dataset(tmp.path(), "a2");
    let (manifest, cases) = read_dataset(&a).unwrap();
    assert_eq!(manifest.cases.len(), 3);
    assert_eq!(cases[0].series.frame_count(), 4);
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    // run_config.json records the output path, which differs.
    let strip = |v: Vec<(String, Vec<u8>)>| {
        v.into_iter()
            .filter(|(n, _)| n != "run_config.json")
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(fa), strip(fb));
    assert!(a.join("run_config.json").exists());
}

#[test]
fn synth_rejects_single_frame() {
    let tmp = TempDir::new().unwrap();
    let out = myoinr(&["synth", "--frames", "1", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("need at least 2 frames"));
}

#[test]
fn dataset_round_trip_is_bitwise() {
    let tmp = TempDir::new().unwrap();
    let cfg = SynthConfig {
        frame_count: 3,
        image_size: 32,
        ..SynthConfig::default()
    };
    let cases = generate_dataset(8, 0, 2, &cfg).unwrap();
    write_dataset(tmp.path(), &cases, None, Some("unit test".into())).unwrap();
    let (manifest, back) = read_dataset(tmp.path()).unwrap();
    assert_eq!(back, cases);
    assert_eq!(manifest.provenance.as_deref(), Some("unit test"));
}

#[test]
fn corrupted_dataset_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let victim = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(".landmarks.bin"))
        .unwrap();
    let mut bytes = fs::read(&victim).unwrap();
    bytes.pop();
    fs::write(&victim, bytes).unwrap();
    let out = myoinr(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&tmp.path().join("t")),
        "--architecture",
        "tiny",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let missing = myoinr(&[
        "train",
        "--data",
        s(&tmp.path().join("nope")),
        "--out",
        s(&tmp.path().join("t")),
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn omitted_training_flags_keep_defaults() {
    let cfg = TrainFlags::default().apply(TrainConfig::default()).unwrap();
    assert_eq!(cfg.weights.alpha, 1e-3);
    assert_eq!(cfg.weights.beta, 1e-4);
    assert_eq!(cfg.omega, 15.0);
    assert_eq!(cfg.learning_rate, 1e-4);
    assert_eq!(cfg.batch_size, 4);
    assert_eq!(cfg.epochs, 14);
    let zero = TrainFlags {
        alpha: Some(0.0),
        ..TrainFlags::default()
    };
    assert_eq!(
        zero.apply(TrainConfig::default()).unwrap().weights.alpha,
        0.0
    );
    let negative = TrainFlags {
        alpha: Some(-1.0),
        ..TrainFlags::default()
    };
    assert!(negative.apply(TrainConfig::default()).is_err());
}

#[test]
fn training_writes_metrics_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    tiny_train(&data, &a, &[]);
    tiny_train(&data, &b, &[]);
    tiny_train(&data, &c, &["--workers", "3"]);
    let ckpt = |d: &Path| fs::read(d.join("model.ckpt")).unwrap();
    assert_eq!(ckpt(&a), ckpt(&b));
    assert_eq!(ckpt(&a), ckpt(&c));
    let (header, rows) = parse_csv(&fs::read_to_string(a.join("metrics.csv")).unwrap());
    assert_eq!(header, ["epoch", "l_pos", "l_jac", "l_z", "total"]);
    assert_eq!(rows.len(), 2);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(run["train"]["learning_rate"], 1e-4);
    assert_eq!(run["precision"], "f32");
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let full = tmp.path().join("full");
    tiny_train(&data, &full, &["--epochs", "3", "--checkpoint-every", "1"]);
    assert!(full.join("checkpoint_epoch_001.ckpt").exists());
    let resumed = tmp.path().join("resumed");
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&resumed),
        "--resume",
        s(&full.join("checkpoint_epoch_001.ckpt")),
        "--epochs",
        "3",
    ]);
    assert_eq!(
        fs::read(full.join("model.ckpt")).unwrap(),
        fs::read(resumed.join("model.ckpt")).unwrap()
    );
    assert_eq!(
        fs::read(full.join("metrics.csv")).unwrap(),
        fs::read(resumed.join("metrics.csv")).unwrap()
    );
}

#[test]
fn precision_comes_from_environment_unless_flagged() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "train",
            "--data",
            s(&data),
            "--out",
            s(out),
            "--architecture",
            "tiny",
            "--epochs",
            "1",
        ];
        args.extend_from_slice(extra);
        let status = Command::new(env!("CARGO_BIN_EXE_myoinr"))
            .args(&args)
            .env("MYOINR_PRECISION", "f64")
            .status()
            .unwrap();
        assert!(status.success());
        read_header(&out.join("model.ckpt")).unwrap().precision
    };
    assert_eq!(run(&tmp.path().join("env"), &[]), Precision::F64);
    assert_eq!(
        run(&tmp.path().join("flag"), &["--precision", "f32"]),
        Precision::F32
    );
    let AnyCheckpoint::F64(ckpt) =
        load_checkpoint(&tmp.path().join("env").join("model.ckpt")).unwrap()
    else {
        panic!("expected double precision");
    };
    assert!(ckpt.training.is_some());
}

#[test]
fn dense_fields_agree_with_landmark_mode() {
    let tmp = TempDir::new().unwrap();
    let cfg = SynthConfig {
        frame_count: 3,
        image_size: 32,
        ..SynthConfig::default()
    };
    // Landmarks moved onto pixel centers so dense samples coincide with them.
    let cases: Vec<_> = generate_dataset(2, 0, 1, &cfg)
        .unwrap()
        .into_iter()
        .map(|mut c| {
            c.landmarks = c.landmarks.map_points(|p| [p[0].round(), p[1].round()]);
            c
        })
        .collect();
    let data = tmp.path().join("d");
    write_dataset(&data, &cases, None, None).unwrap();
    let model_dir = tmp.path().join("m");
    tiny_train(&data, &model_dir, &["--epochs", "1"]);
    let out = tmp.path().join("t");
    ok(&[
        "track",
        "--model",
        s(&model_dir.join("model.ckpt")),
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--resolution",
        "8",
        "--resolution",
        "32",
        "--resolution",
        "64",
    ]);
    let m = read_predictions(&out).unwrap();
    let entry = &m.cases[0];
    assert_eq!(
        entry.dense.iter().map(|d| d.resolution).collect::<Vec<_>>(),
        [8, 32, 64]
    );
    let native = &entry.dense[1];
    let (dims, dense) = read_array(&out.join(&native.displacements.file)).unwrap();
    assert_eq!(dims, [3, 32, 32, 2]);
    let (_, disp) = read_array(&out.join(&entry.displacements.file)).unwrap();
    let base = cases[0].landmarks.points(0);
    let mut worst = 0.0f32;
    for k in 0..3 {
        for (i, p) in base.iter().enumerate() {
            let cell = (k * 32 * 32 + p[1] as usize * 32 + p[0] as usize) * 2;
            let at = (k * base.len() + i) * 2;
            worst = worst
                .max((dense[cell] - disp[at]).abs())
                .max((dense[cell + 1] - disp[at + 1]).abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

fn write_perfect_predictions(data: &Path, out: &Path) {
    let (_, cases) = read_dataset(data).unwrap();
    fs::create_dir_all(out).unwrap();
    let entries = cases
        .iter()
        .map(|c| {
            let lm = &c.landmarks;
            let dims = [lm.frame_count(), lm.points_per_frame(), 2];
            let file = format!("{}.pred_landmarks.bin", c.id());
            let bytes = write_array(&out.join(&file), &dims, &to_f32(lm.to_flat())).unwrap();
            let zero = format!("{}.pred_displacements.bin", c.id());
            let zbytes =
                write_array(&out.join(&zero), &dims, &vec![0.0; dims.iter().product()]).unwrap();
            PredictionEntry {
                id: c.id().to_string(),
                slice_index: c.series.slice_index,
                frame_count: lm.frame_count(),
                image_size: c.series.image_size(),
                rings: lm.rings(),
                spokes: lm.spokes(),
                landmarks: FileRef { file, bytes },
                displacements: FileRef {
                    file: zero,
                    bytes: zbytes,
                },
                dense: vec![],
            }
        })
        .collect();
    let manifest = PredictionManifest {
        format_version: 1,
        model: "none".into(),
        dataset: data.to_path_buf(),
        cases: entries,
    };
    write_json(&out.join(PREDICTIONS_FILE), &manifest).unwrap();
}

#[test]
fn perfect_predictions_give_zero_error_report() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let pred = tmp.path().join("p");
    write_perfect_predictions(&data, &pred);
    let out = tmp.path().join("r");
    ok(&[
        "strain",
        "--pred",
        s(&pred),
        "--ref",
        s(&data),
        "--out",
        s(&out),
    ]);
    let (header, rows) = parse_csv(&fs::read_to_string(out.join("strain_cohort.csv")).unwrap());
    assert_eq!(
        header,
        [
            "case_id",
            "point_error_mm",
            "gcs",
            "gcs_bias",
            "gcs_error",
            "grs",
            "grs_bias",
            "grs_error"
        ]
    );
    let row = &rows[0];
    for col in [1, 3, 4, 6, 7] {
        assert_eq!(row[col].parse::<f64>().unwrap(), 0.0, "{}", header[col]);
    }
    let (_, case_rows) = parse_csv(&fs::read_to_string(out.join("strain_cases.csv")).unwrap());
    assert_eq!(case_rows.len(), 3);
    let overlays: Vec<_> = fs::read_dir(out.join("overlays")).unwrap().collect();
    assert_eq!(overlays.len(), 3);
}

#[test]
fn missing_reference_leaves_no_partial_report() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let pred = tmp.path().join("p");
    write_perfect_predictions(&data, &pred);
    let victim = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".landmarks.bin"))
        .max()
        .unwrap();
    fs::remove_file(victim).unwrap();
    let out = tmp.path().join("r");
    let res = myoinr(&[
        "strain",
        "--pred",
        s(&pred),
        "--ref",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn overlay_png_uses_palette_colors() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let pred = tmp.path().join("p");
    write_perfect_predictions(&data, &pred);
    let out = tmp.path().join("r");
    ok(&[
        "strain",
        "--pred",
        s(&pred),
        "--ref",
        s(&data),
        "--out",
        s(&out),
    ]);
    let first = fs::read_dir(out.join("overlays"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(&first).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!((info.width, info.height), (128, 128));
    let red = myoinr_cli::overlay::PALETTE[myoinr_cli::overlay::PREDICTED_CLASS];
    assert!(buf.chunks(3).any(|px| px == red));
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = ok(&["gradcheck", "--seed", "3", "--draws", "20"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("input_jacobian") && text.contains("threshold"));
    let bad = myoinr(&["gradcheck", "--draws", "5", "--corrupt", "jacobian"]);
    assert_eq!(bad.status.code(), Some(4));
    let bad = myoinr(&["gradcheck", "--draws", "5", "--corrupt", "gradient"]);
    assert_eq!(bad.status.code(), Some(4));
    assert_eq!(
        myoinr(&["gradcheck", "--size", "full"]).status.code(),
        Some(2)
    );
}

#[test]
fn ablation_rows_follow_alphas() {
    let tmp = TempDir::new().unwrap();
    let data = tiny_dataset(tmp.path(), "d");
    let out = tmp.path().join("ab");
    let empty = myoinr(&[
        "ablate",
        "--data",
        s(&data),
        "--alphas",
        "",
        "--out",
        s(&out),
    ]);
    assert_eq!(empty.status.code(), Some(2));
    let single = myoinr(&["ablate", "--data", s(&data), "--alphas", "0", "--alpha", "0.1", "--out", s(&out)]);
    assert_eq!(single.status.code(), Some(2));
    ok(&[
        "ablate",
        "--data",
        s(&data),
        "--alphas",
        "0,0.1",
        "--architecture",
        "tiny",
        "--epochs",
        "1",
        "--out",
        s(&out),
        "--save-models",
    ]);
    let (header, rows) = parse_csv(&fs::read_to_string(out.join("ablation.csv")).unwrap());
    assert_eq!(
        header,
        [
            "alpha",
            "point_error",
            "gcs_bias",
            "gcs_error",
            "grs_bias",
            "grs_error"
        ]
    );
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[1][0], "0.1");
    assert!(out.join("alpha_0.1.ckpt").exists());
}
