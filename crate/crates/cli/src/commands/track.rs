use std::path::{Path, PathBuf};

use myoinr_core::diffnet::InrModel;
use myoinr_core::objective::with_workers;
use myoinr_core::track::{dense_field, track_landmarks};
use myoinr_core::{CaseRecord, LandmarkGrid, Real};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, AnyCheckpoint};
use crate::cli::TrackArgs;
use crate::config::RunConfig;
use crate::dataset::{
    case_stem, create_dir, read_dataset, read_json, select_cases, write_json, FileRef,
};
use crate::error::{CliError, CliResult};
use crate::payload::{to_f32, write_array};

pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseEntry {
    pub resolution: usize,
    pub frames: Vec<usize>,
    /// `[frames, R, R, 2]` pixel displacements; sample `(i, j)` sits at
    /// pixel `(j, i) * (size - 1) / (R - 1)`.
    pub displacements: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub id: String,
    pub slice_index: u8,
    pub frame_count: usize,
    pub image_size: usize,
    pub rings: usize,
    pub spokes: usize,
    /// `[frames, points, 2]` predicted pixel positions.
    pub landmarks: FileRef,
    /// `[frames, points, 2]` predicted pixel displacements of the reference landmarks.
    pub displacements: FileRef,
    pub dense: Vec<DenseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub format_version: u32,
    pub model: PathBuf,
    pub dataset: PathBuf,
    pub cases: Vec<PredictionEntry>,
}

fn track_case<T: Real>(
    model: &InrModel<T>,
    case: &CaseRecord,
    resolutions: &[usize],
    frames: Option<&[usize]>,
    out: &Path,
) -> CliResult<PredictionEntry> {
    let stem = case_stem(case.id(), case.series.slice_index);
    let predicted = track_landmarks(model, &case.series, &case.landmarks)?;
    let dims = [predicted.frame_count(), predicted.points_per_frame(), 2];
    let landmarks_file = format!("{stem}.pred_landmarks.bin");
    let landmarks_bytes = write_array(
        &out.join(&landmarks_file),
        &dims,
        &to_f32(predicted.to_flat()),
    )?;
    let base = case.landmarks.points(0);
    let disp: Vec<f64> = predicted
        .frames()
        .iter()
        .flat_map(|f| {
            f.iter()
                .zip(base)
                .flat_map(|(p, b)| [p[0] - b[0], p[1] - b[1]])
        })
        .collect();
    let disp_file = format!("{stem}.pred_displacements.bin");
    let disp_bytes = write_array(&out.join(&disp_file), &dims, &to_f32(disp))?;

    let mut dense = Vec::new();
    for &r in resolutions {
        let field = dense_field(model, &case.series, r, frames)?;
        let flat = field
            .displacements
            .iter()
            .flatten()
            .flat_map(|d| [d[0], d[1]]);
        let file = format!("{stem}.dense_r{r}.bin");
        let bytes = write_array(
            &out.join(&file),
            &[field.frames.len(), r, r, 2],
            &to_f32(flat),
        )?;
        dense.push(DenseEntry {
            resolution: r,
            frames: field.frames,
            displacements: FileRef { file, bytes },
        });
    }
    Ok(PredictionEntry {
        id: case.id().to_string(),
        slice_index: case.series.slice_index,
        frame_count: case.series.frame_count(),
        image_size: case.series.image_size(),
        rings: predicted.rings(),
        spokes: predicted.spokes(),
        landmarks: FileRef {
            file: landmarks_file,
            bytes: landmarks_bytes,
        },
        displacements: FileRef {
            file: disp_file,
            bytes: disp_bytes,
        },
        dense,
    })
}

fn track_all<T: Real>(
    model: &InrModel<T>,
    cases: &[CaseRecord],
    args: &TrackArgs,
) -> CliResult<Vec<PredictionEntry>> {
    let cfg = model.config();
    if let Some(c) = cases
        .iter()
        .find(|c| c.series.image_size() != cfg.image_size)
    {
        return Err(CliError::data(format!(
            "model expects {0}x{0} frames but case {1} has {2}x{2}",
            cfg.image_size,
            c.id(),
            c.series.image_size()
        )));
    }
    let frames = (!args.frames.is_empty()).then_some(args.frames.as_slice());
    cases
        .iter()
        .map(|c| track_case(model, c, &args.resolutions, frames, &args.out))
        .collect()
}

pub fn cmd_track(args: &TrackArgs) -> CliResult<PredictionManifest> {
    if let Some(&r) = args.resolutions.iter().find(|&&r| r < 2) {
        return Err(CliError::Usage(format!(
            "resolution must be at least 2, got {r}"
        )));
    }
    let ckpt = load_checkpoint(&args.model)?;
    let (_, cases) = read_dataset(&args.data)?;
    let cases = select_cases(
        cases,
        (!args.cases.is_empty()).then_some(args.cases.as_slice()),
    )?;
    create_dir(&args.out)?;
    let entries = with_workers(args.workers, || match &ckpt {
        AnyCheckpoint::F32(c) => track_all(&c.model, &cases, args),
        AnyCheckpoint::F64(c) => track_all(&c.model, &cases, args),
    })??;
    let manifest = PredictionManifest {
        format_version: FORMAT_VERSION,
        model: args.model.clone(),
        dataset: args.data.clone(),
        cases: entries,
    };
    write_json(&args.out.join(PREDICTIONS_FILE), &manifest)?;
    let mut run = RunConfig::new("track", &args.out, ckpt.precision(), args.workers)
        .option("model", &args.model)
        .option("cases", &args.cases)
        .option("resolutions", &args.resolutions)
        .option("frames", &args.frames);
    run.dataset = Some(args.data.clone());
    run.write()?;
    Ok(manifest)
}

pub fn read_predictions(dir: &Path) -> CliResult<PredictionManifest> {
    let m: PredictionManifest = read_json(&dir.join(PREDICTIONS_FILE))?;
    if m.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "{}: prediction format version {} is not supported",
            dir.display(),
            m.format_version
        )));
    }
    Ok(m)
}

/// Predicted landmark grid of one entry.
pub fn read_predicted_landmarks(dir: &Path, entry: &PredictionEntry) -> CliResult<LandmarkGrid> {
    let path = dir.join(&entry.landmarks.file);
    let (dims, data) = crate::payload::read_array(&path)?;
    let points = entry.rings * entry.spokes;
    if dims != [entry.frame_count, points, 2] {
        return Err(CliError::data(format!(
            "{}: dimensions {dims:?} do not match {} frames of {points} points",
            path.display(),
            entry.frame_count
        )));
    }
    let flat: Vec<f64> = data.into_iter().map(f64::from).collect();
    Ok(LandmarkGrid::from_flat(
        entry.rings,
        entry.spokes,
        entry.frame_count,
        &flat,
    )?)
}
