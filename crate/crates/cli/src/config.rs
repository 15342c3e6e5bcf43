use std::path::{Path, PathBuf};

use myoinr_core::{Precision, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::write_json;
use crate::error::CliResult;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

/// Everything that produced an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub precision: Precision,
    pub workers: usize,
    /// Epochs between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_every: Option<usize>,
    pub train: Option<TrainConfig>,
    /// Command-specific flags.
    pub options: Map<String, Value>,
}

impl RunConfig {
    pub fn new(command: &str, output: &Path, precision: Precision, workers: usize) -> Self {
        Self {
            command: command.to_string(),
            dataset: None,
            output: output.to_path_buf(),
            precision,
            workers,
            checkpoint_every: None,
            train: None,
            options: Map::new(),
        }
    }

    pub fn option(mut self, key: &str, value: impl Serialize) -> Self {
        self.options.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable option"),
        );
        self
    }

    pub fn write(&self) -> CliResult<()> {
        write_json(&self.output.join(RUN_CONFIG_FILE), self)
    }
}
