//! Checkpoint files.
//!
//! A checkpoint is one line of JSON (the header), a newline, then the body:
//! little-endian floats of the header's precision. The body holds the model
//! parameters in canonical order and, for resumable checkpoints, the Adam
//! first and second moments in the same order. The header records the
//! architecture, the parameter blocks, and the SHA-256 of the body.

use std::fs;
use std::path::Path;

use myoinr_core::diffnet::{InrModel, ModelConfig};
use myoinr_core::objective::{EpochLoss, OptimizerState};
use myoinr_core::{Precision, Real, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "myoinr-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyInfo {
    /// In order: `params`, then optionally `adam_m`, `adam_v`.
    pub segments: Vec<String>,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHeader {
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub config: TrainConfig,
    pub history: Vec<EpochLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub format_version: u32,
    pub precision: Precision,
    pub model: ModelConfig,
    pub parameter_count: usize,
    pub parameters: Vec<ParamEntry>,
    pub body: BodyInfo,
    pub training: Option<TrainingHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState<T> {
    pub epoch: usize,
    pub config: TrainConfig,
    pub history: Vec<EpochLoss>,
    pub optimizer: OptimizerState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T: Real> {
    pub model: InrModel<T>,
    pub training: Option<TrainingState<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

impl AnyCheckpoint {
    pub fn precision(&self) -> Precision {
        match self {
            AnyCheckpoint::F32(_) => Precision::F32,
            AnyCheckpoint::F64(_) => Precision::F64,
        }
    }
}

fn value_bytes(p: Precision) -> usize {
    match p {
        Precision::F32 => 4,
        Precision::F64 => 8,
    }
}

fn push_values<T: Real>(out: &mut Vec<u8>, values: &[T]) {
    for v in values {
        match T::PRECISION {
            Precision::F32 => out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes()),
            Precision::F64 => out.extend_from_slice(&v.to_f64().to_le_bytes()),
        }
    }
}

fn parse_values<T: Real>(bytes: &[u8]) -> Vec<T> {
    match T::PRECISION {
        Precision::F32 => bytes
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect(),
        Precision::F64 => bytes
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    }
}

pub fn encode_checkpoint<T: Real>(
    model: &InrModel<T>,
    training: Option<&TrainingState<T>>,
) -> Vec<u8> {
    let mut body = Vec::new();
    push_values(&mut body, model.params());
    let mut segments = vec!["params".to_string()];
    if let Some(t) = training {
        push_values(&mut body, &t.optimizer.m);
        push_values(&mut body, &t.optimizer.v);
        segments.push("adam_m".into());
        segments.push("adam_v".into());
    }
    let header = CheckpointHeader {
        format: FORMAT.into(),
        format_version: FORMAT_VERSION,
        precision: T::PRECISION,
        model: model.config().clone(),
        parameter_count: model.param_count(),
        parameters: model
            .layout()
            .blocks()
            .iter()
            .map(|b| ParamEntry {
                name: b.name.clone(),
                shape: b.shape.clone(),
                offset: b.offset,
            })
            .collect(),
        body: BodyInfo {
            segments,
            bytes: body.len() as u64,
            sha256: hex::encode(Sha256::digest(&body)),
        },
        training: training.map(|t| TrainingHeader {
            epoch: t.epoch,
            step: t.optimizer.step,
            beta1: t.optimizer.beta1,
            beta2: t.optimizer.beta2,
            epsilon: t.optimizer.epsilon,
            config: t.config.clone(),
            history: t.history.clone(),
        }),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(&body);
    out
}

pub fn save_checkpoint<T: Real>(
    path: &Path,
    model: &InrModel<T>,
    training: Option<&TrainingState<T>>,
) -> CliResult<()> {
    fs::write(path, encode_checkpoint(model, training)).map_err(|e| CliError::io(path, e))
}

fn split(bytes: &[u8]) -> CliResult<(CheckpointHeader, &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::data("checkpoint header is not terminated"))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| CliError::data(format!("checkpoint header: {e}")))?;
    if header.format != FORMAT || header.format_version != FORMAT_VERSION {
        return Err(CliError::data(format!(
            "unsupported checkpoint format {} v{}",
            header.format, header.format_version
        )));
    }
    Ok((header, &bytes[nl + 1..]))
}

fn decode_typed<T: Real>(header: CheckpointHeader, body: &[u8]) -> CliResult<Checkpoint<T>> {
    let width = value_bytes(T::PRECISION);
    let n = header.parameter_count;
    let segments = header.body.segments.len();
    if body.len() != n * width * segments {
        return Err(CliError::data(
            "checkpoint body length does not match its header",
        ));
    }
    let model = InrModel::<T>::from_params(header.model.clone(), parse_values(&body[..n * width]))?;
    let layout_matches = model.layout().blocks().len() == header.parameters.len()
        && model
            .layout()
            .blocks()
            .iter()
            .zip(&header.parameters)
            .all(|(b, e)| b.name == e.name && b.shape == e.shape && b.offset == e.offset);
    if !layout_matches || model.param_count() != n {
        return Err(CliError::data(
            "checkpoint parameter order does not match its architecture",
        ));
    }
    let training = match header.training {
        None => None,
        Some(t) => {
            if segments != 3 {
                return Err(CliError::data(
                    "resumable checkpoint is missing optimizer moments",
                ));
            }
            let m = parse_values(&body[n * width..2 * n * width]);
            let v = parse_values(&body[2 * n * width..]);
            Some(TrainingState {
                epoch: t.epoch,
                config: t.config,
                history: t.history,
                optimizer: OptimizerState {
                    m,
                    v,
                    step: t.step,
                    beta1: t.beta1,
                    beta2: t.beta2,
                    epsilon: t.epsilon,
                },
            })
        }
    };
    Ok(Checkpoint { model, training })
}

pub fn decode_checkpoint(bytes: &[u8]) -> CliResult<AnyCheckpoint> {
    let (header, body) = split(bytes)?;
    if body.len() as u64 != header.body.bytes {
        return Err(CliError::data(format!(
            "checkpoint body has {} bytes, header declares {}",
            body.len(),
            header.body.bytes
        )));
    }
    if hex::encode(Sha256::digest(body)) != header.body.sha256 {
        return Err(CliError::data("checkpoint checksum mismatch"));
    }
    Ok(match header.precision {
        Precision::F32 => AnyCheckpoint::F32(decode_typed(header, body)?),
        Precision::F64 => AnyCheckpoint::F64(decode_typed(header, body)?),
    })
}

pub fn load_checkpoint(path: &Path) -> CliResult<AnyCheckpoint> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_header(path: &Path) -> CliResult<CheckpointHeader> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(split(&bytes)?.0)
}
