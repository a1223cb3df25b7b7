use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const VERSION: &str = concat!("bgcnn-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master: u64,
    pub repetition: u64,
    pub split: u64,
    pub model: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub test_accuracy: Option<f64>,
    pub log_joint: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub version: String,
    pub task: String,
    pub method: String,
    pub repetition: usize,
    pub seeds: RunSeeds,
    pub metrics: RunMetrics,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub wall_seconds: f64,
}

impl RunRecord {
    /// The value summarized across repetitions.
    pub fn headline(&self) -> Option<f64> {
        self.metrics.test_accuracy.or(self.metrics.log_joint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub sd: f64,
}

impl MethodSummary {
    pub fn new(method: &str, metric: &str, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / n };
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { method: method.into(), metric: metric.into(), values, mean, sd }
    }
}

/// Timing-free digest of a run directory; identical configs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub version: String,
    pub task: String,
    pub dataset: String,
    pub per_class: usize,
    pub repetitions: usize,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    let err = |e: std::io::Error| CliError::Runtime(bgcnn::Error::Io { path: path.to_path_buf(), source: e });
    std::fs::write(&tmp, contents).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.into()))? + "\n";
    write_atomic(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
