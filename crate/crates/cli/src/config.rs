use std::path::{Path, PathBuf};

use bgcnn::attack::SelectionSizes;
use bgcnn::ensemble::EnsembleConfig;
use bgcnn::gcnn::GcnnConfig;
use bgcnn::graph::SplitMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    TrainGcnn,
    TrainBayesian,
    MmsbmFit,
    Attack,
    Report,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::TrainGcnn => "train_gcnn",
            Task::TrainBayesian => "train_bayesian",
            Task::MmsbmFit => "mmsbm_fit",
            Task::Attack => "attack",
            Task::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub per_class: usize,
    pub mode: SplitMode,
    /// Random splits draw a fresh split per repetition from this seed.
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { per_class: 20, mode: SplitMode::Fixed, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSettings {
    pub selection_trials: usize,
    pub eval_trials: usize,
    pub sizes: SelectionSizes,
    pub budget_override: Option<usize>,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self { selection_trials: 10, eval_trials: 5, sizes: SelectionSizes::default(), budget_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Container directory (or its `manifest.json`).
    pub dataset: PathBuf,
    pub task: Task,
    pub split: SplitSpec,
    pub repetitions: usize,
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    pub gcnn: GcnnConfig,
    pub ensemble: EnsembleConfig,
    /// Train a plain GCNN next to the Bayesian model on the same split.
    pub include_baseline: bool,
    pub attack: AttackSettings,
    /// Trace interval for `mmsbm_fit`.
    pub trace_every: u64,
    /// Output directories of earlier runs, for `report`.
    pub runs: Vec<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            task: Task::TrainGcnn,
            split: SplitSpec::default(),
            repetitions: 10,
            seed: 0,
            gcnn: GcnnConfig::default(),
            ensemble: EnsembleConfig::default(),
            include_baseline: true,
            attack: AttackSettings::default(),
            trace_every: 10,
            runs: Vec::new(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::invalid("output_dir is empty"));
        }
        if self.task == Task::Report {
            if self.runs.is_empty() {
                return Err(CliError::invalid("report needs at least one run directory"));
            }
            if let Some(r) = self.runs.iter().find(|r| !r.join("summary.json").is_file()) {
                return Err(CliError::Validation(format!("{} has no summary.json", r.display())));
            }
            return Ok(());
        }
        let manifest = if self.dataset.is_file() { self.dataset.clone() } else { self.dataset.join("manifest.json") };
        if !manifest.is_file() {
            return Err(CliError::Validation(format!("dataset container missing: {}", manifest.display())));
        }
        if self.repetitions == 0 {
            return Err(CliError::invalid("repetitions must be at least 1"));
        }
        if self.split.per_class == 0 {
            return Err(CliError::invalid("split.per_class must be at least 1"));
        }
        self.gcnn.validate().map_err(CliError::invalid)?;
        if matches!(self.task, Task::TrainBayesian | Task::MmsbmFit | Task::Attack) {
            self.ensemble.validate().map_err(CliError::invalid)?;
        }
        if self.task == Task::MmsbmFit && self.trace_every == 0 {
            return Err(CliError::invalid("trace_every must be at least 1"));
        }
        if self.task == Task::Attack && (self.attack.selection_trials == 0 || self.attack.eval_trials == 0) {
            return Err(CliError::invalid("attack trials must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (sorted keys, `output_dir` left out).
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }
}

fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}
