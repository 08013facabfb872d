use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ScenarioKind, ScenarioSpec, SizeMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightInit {
    Imagenet1k,
    Random,
}

/// Training hyperparameters forwarded verbatim to the backend.
///
/// Defaults: Adam with beta1 = 0.99 and beta2 = 0.999, learning rate 1e-5,
/// batch size 64, 100 epochs, ImageNet-1K initialisation, 8 data workers.
/// beta1 = 0.99 is higher than the customary 0.9; it is the published setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init: WeightInit,
    pub workers: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            optimizer: Optimizer::Adam,
            beta1: 0.99,
            beta2: 0.999,
            learning_rate: 1e-5,
            batch_size: 64,
            epochs: 100,
            init: WeightInit::Imagenet1k,
            workers: 8,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }
}

/// Per-model hyperparameter overrides, e.g. one model entry per learning
/// rate of a grid search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParamsOverride {
    pub optimizer: Option<Optimizer>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub init: Option<WeightInit>,
    pub workers: Option<usize>,
}

impl HyperParamsOverride {
    pub fn apply(&self, base: &HyperParams) -> HyperParams {
        HyperParams {
            optimizer: self.optimizer.unwrap_or(base.optimizer),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            init: self.init.unwrap_or(base.init),
            workers: self.workers.unwrap_or(base.workers),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundConfig {
    pub name: String,
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Baseline {},
    Inject {
        percent: f64,
        /// Fixed sample size instead of `round(percent / 100 * B)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    OnlySynthetic {},
}

impl ScenarioConfig {
    pub fn explicit_seed(&self) -> Option<u64> {
        match self {
            ScenarioConfig::Inject { seed, .. } => *seed,
            _ => None,
        }
    }

    pub fn to_spec(&self, sampling_seed: u64) -> ScenarioSpec {
        match *self {
            ScenarioConfig::Baseline {} => ScenarioSpec {
                seed: sampling_seed,
                ..ScenarioSpec::baseline()
            },
            ScenarioConfig::Inject {
                percent,
                sample_size,
                ..
            } => ScenarioSpec {
                kind: ScenarioKind::Inject { percent },
                size_mode: sample_size.map_or(SizeMode::Formula, SizeMode::Override),
                seed: sampling_seed,
            },
            ScenarioConfig::OnlySynthetic {} => ScenarioSpec {
                seed: sampling_seed,
                ..ScenarioSpec::only_synthetic()
            },
        }
    }
}

/// Backend command: either an argument vector or a whitespace-separated
/// string. `{runspec}` is replaced by the path of `runspec.json`; when no
/// argument contains it the path is appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandTemplate {
    Args(Vec<String>),
    Line(String),
}

impl CommandTemplate {
    pub fn args(&self) -> Vec<String> {
        match self {
            CommandTemplate::Args(a) => a.clone(),
            CommandTemplate::Line(l) => l.split_whitespace().map(str::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Subprocess { command: CommandTemplate },
    Stub { separation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub backend: BackendConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<HyperParamsOverride>,
}

impl ModelConfig {
    pub fn effective_hyperparameters(&self, base: &HyperParams) -> HyperParams {
        self.hyperparameters
            .as_ref()
            .map_or(*base, |o| o.apply(base))
    }
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    pub rounds: Vec<RoundConfig>,
    pub smdd_manifest: PathBuf,
    pub scenarios: Vec<ScenarioConfig>,
    pub models: Vec<ModelConfig>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub hyperparameters: HyperParams,
    /// Inject synthetic samples into the training side only, after the split.
    #[serde(default)]
    pub inject_after_split: bool,
    /// Maximum number of runs executed concurrently.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl ExperimentPlan {
    /// Checks every invariant that does not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.rounds.is_empty() {
            return bad("`rounds` must list at least one round".into());
        }
        if self.scenarios.is_empty() {
            return bad("`scenarios` must list at least one scenario".into());
        }
        if self.models.is_empty() {
            return bad("`models` must list at least one model".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!(
                "val_fraction must lie strictly between 0 and 1, got {}",
                self.val_fraction
            ));
        }
        if self.jobs < 1 {
            return bad("jobs must be at least 1".into());
        }
        self.hyperparameters.validate()?;
        let mut names = HashSet::new();
        for r in &self.rounds {
            if r.name.is_empty() || !names.insert(r.name.as_str()) {
                return bad(format!(
                    "round names must be unique and non-empty (`{}`)",
                    r.name
                ));
            }
        }
        let mut names = HashSet::new();
        for m in &self.models {
            if m.name.is_empty() || !names.insert(m.name.as_str()) {
                return bad(format!(
                    "model names must be unique and non-empty (`{}`)",
                    m.name
                ));
            }
            m.effective_hyperparameters(&self.hyperparameters)
                .validate()
                .map_err(|e| Error::Config(format!("model `{}`: {e}", m.name)))?;
            match &m.backend {
                BackendConfig::Stub { separation } if separation.is_nan() || *separation < 0.0 => {
                    return bad(format!("model `{}`: stub separation must be >= 0", m.name));
                }
                BackendConfig::Subprocess { command } if command.args().is_empty() => {
                    return bad(format!("model `{}`: empty backend command", m.name));
                }
                _ => {}
            }
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            s.to_spec(0)
                .validate()
                .map_err(|e| Error::Config(format!("scenario {i}: {e}")))?;
        }
        Ok(())
    }

    /// Resolves relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for r in &mut self.rounds {
            join(&mut r.train_manifest);
            join(&mut r.test_manifest);
        }
        join(&mut self.smdd_manifest);
        join(&mut self.output_dir);
    }

    pub fn check_paths(&self) -> Result<()> {
        let inputs = self
            .rounds
            .iter()
            .flat_map(|r| [&r.train_manifest, &r.test_manifest])
            .chain(std::iter::once(&self.smdd_manifest));
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "manifest `{}` does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a plan document without touching the filesystem.
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    let plan: ExperimentPlan =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    plan.validate()?;
    Ok(plan)
}

/// Loads a plan, resolving relative paths against the config file's directory
/// and checking that every input manifest exists.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentPlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut plan = parse_config(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    plan.resolve_paths(base);
    plan.check_paths()?;
    Ok(plan)
}
