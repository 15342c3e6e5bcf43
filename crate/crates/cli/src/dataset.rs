//! Dataset directories: `manifest.json` plus two payload files per slice.

use std::fs;
use std::path::{Path, PathBuf};

use myoinr_core::synth::{AnalyticDeformation, SynthConfig};
use myoinr_core::{CaseRecord, Image, LandmarkGrid, TagFrameSeries};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::payload::{read_array, to_f32, write_array};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub file: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    pub slice_index: u8,
    pub frame_count: usize,
    pub image_size: usize,
    pub pixel_spacing_mm: f64,
    pub frame_interval_s: f64,
    pub rings: usize,
    pub spokes: usize,
    /// `[frames, rows, cols]`.
    pub images: FileRef,
    /// `[frames, points, 2]`, pixel `(x, y)`.
    pub landmarks: FileRef,
    pub deformation: Option<AnalyticDeformation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEcho {
    pub seed: u64,
    pub first_case: u64,
    pub config: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub generator: Option<GeneratorEcho>,
    pub provenance: Option<String>,
    pub cases: Vec<CaseEntry>,
}

pub fn case_stem(id: &str, slice: u8) -> String {
    format!("{id}_s{slice}")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `cases` into `dir` and returns the manifest.
pub fn write_dataset(
    dir: &Path,
    cases: &[CaseRecord],
    generator: Option<GeneratorEcho>,
    provenance: Option<String>,
) -> CliResult<DatasetManifest> {
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(cases.len());
    for case in cases {
        let s = &case.series;
        let stem = case_stem(case.id(), s.slice_index);
        let size = s.image_size();
        let images_file = format!("{stem}.images.bin");
        let pixels: Vec<f32> = s
            .frames()
            .iter()
            .flat_map(|f| f.data().iter().copied())
            .collect();
        let images_bytes = write_array(
            &dir.join(&images_file),
            &[s.frame_count(), size, size],
            &pixels,
        )?;
        let landmarks_file = format!("{stem}.landmarks.bin");
        let lm = &case.landmarks;
        let landmark_bytes = write_array(
            &dir.join(&landmarks_file),
            &[lm.frame_count(), lm.points_per_frame(), 2],
            &to_f32(lm.to_flat()),
        )?;
        entries.push(CaseEntry {
            id: case.id().to_string(),
            slice_index: s.slice_index,
            frame_count: s.frame_count(),
            image_size: size,
            pixel_spacing_mm: s.pixel_spacing_mm,
            frame_interval_s: s.frame_interval_s,
            rings: lm.rings(),
            spokes: lm.spokes(),
            images: FileRef {
                file: images_file,
                bytes: images_bytes,
            },
            landmarks: FileRef {
                file: landmarks_file,
                bytes: landmark_bytes,
            },
            deformation: case.ground_truth_deformation,
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        generator,
        provenance,
        cases: entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> CliResult<D> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> CliResult<DatasetManifest> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "{}: dataset format version {} is not supported (expected {FORMAT_VERSION})",
            dir.display(),
            manifest.format_version
        )));
    }
    Ok(manifest)
}

fn checked_payload(dir: &Path, r: &FileRef, dims: &[usize]) -> CliResult<Vec<f32>> {
    let path: PathBuf = dir.join(&r.file);
    let len = fs::metadata(&path)
        .map_err(|e| CliError::io(&path, e))?
        .len();
    if len != r.bytes {
        return Err(CliError::data(format!(
            "{}: {len} bytes on disk, manifest declares {}",
            path.display(),
            r.bytes
        )));
    }
    let (found, data) = read_array(&path)?;
    if found != dims {
        return Err(CliError::data(format!(
            "{}: dimensions {found:?}, expected {dims:?}",
            path.display()
        )));
    }
    Ok(data)
}

pub fn read_case(dir: &Path, entry: &CaseEntry) -> CliResult<CaseRecord> {
    let size = entry.image_size;
    let pixels = checked_payload(dir, &entry.images, &[entry.frame_count, size, size])?;
    let frames = pixels
        .chunks_exact(size * size)
        .map(|c| Image::new(size, c.to_vec()))
        .collect::<myoinr_core::Result<Vec<_>>>()?;
    let points = entry.rings * entry.spokes;
    let flat = checked_payload(dir, &entry.landmarks, &[entry.frame_count, points, 2])?;
    let flat: Vec<f64> = flat.into_iter().map(f64::from).collect();
    let landmarks = LandmarkGrid::from_flat(entry.rings, entry.spokes, entry.frame_count, &flat)?;
    let series = TagFrameSeries::new(
        frames,
        entry.pixel_spacing_mm,
        entry.frame_interval_s,
        entry.id.clone(),
        entry.slice_index,
    )?;
    Ok(CaseRecord::new(series, landmarks, entry.deformation)?)
}

pub fn read_dataset(dir: &Path) -> CliResult<(DatasetManifest, Vec<CaseRecord>)> {
    let manifest = read_manifest(dir)?;
    let cases = manifest
        .cases
        .iter()
        .map(|e| read_case(dir, e))
        .collect::<CliResult<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(CliError::data(format!(
            "{}: dataset has no cases",
            dir.display()
        )));
    }
    Ok((manifest, cases))
}

/// Selects cases by id; `None` keeps all.
pub fn select_cases(cases: Vec<CaseRecord>, ids: Option<&[String]>) -> CliResult<Vec<CaseRecord>> {
    let Some(ids) = ids else {
        return Ok(cases);
    };
    for id in ids {
        if !cases.iter().any(|c| c.id() == id) {
            return Err(CliError::data(format!("case {id} not found in dataset")));
        }
    }
    Ok(cases
        .into_iter()
        .filter(|c| ids.iter().any(|i| i == c.id()))
        .collect())
}
