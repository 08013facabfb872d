//! Experiment plans: config loading, expansion into runs, execution and
//! aggregation.
//!
//! A plan is the product rounds x scenarios x models. Each run gets three
//! seeds derived from the master seed:
//!
//! | stream   | tag | counters                          |
//! |----------|-----|-----------------------------------|
//! | sampling | 1   | round index, scenario index       |
//! | split    | 2   | round index, scenario index       |
//! | backend  | 3   | round index, scenario index, model index |
//!
//! `seed = fold(splitmix64, master_seed ^ tag, counters)`. Models sharing a
//! (round, scenario) pair therefore train on the same sample and split, and
//! appending a model never changes the seeds of existing runs. An explicit
//! `seed` on an inject scenario replaces the derived sampling seed.

pub mod backend;
mod config;
mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::sampling::ScenarioSpec;

pub use backend::{stub_scores, Backend, ScorerBackend, StubBackend, SubprocessBackend};
pub use config::{
    load_config, parse_config, BackendConfig, CommandTemplate, ExperimentPlan, HyperParams,
    HyperParamsOverride, ModelConfig, Optimizer, RoundConfig, ScenarioConfig, WeightInit,
    SCHEMA_VERSION,
};
pub use runner::{
    aggregate, check_coverage, execute_run, run_plan, ReportBundle, ResultsFile, RunFailure,
    RunInputs, RunOutcome, RunStatus,
};

const STREAM_SAMPLING: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_BACKEND: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(master ^ stream), |h, &c| splitmix64(h ^ c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub sampling: u64,
    pub split: u64,
    pub backend: u64,
}

impl RunSeeds {
    pub fn derive(master: u64, round: usize, scenario: usize, model: usize) -> Self {
        let (r, s, m) = (round as u64, scenario as u64, model as u64);
        RunSeeds {
            sampling: derive_seed(master, STREAM_SAMPLING, &[r, s]),
            split: derive_seed(master, STREAM_SPLIT, &[r, s]),
            backend: derive_seed(master, STREAM_BACKEND, &[r, s, m]),
        }
    }
}

/// One fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub round: String,
    pub round_index: usize,
    pub scenario_index: usize,
    pub model_index: usize,
    pub model: String,
    /// Scenario with its sampling seed filled in.
    pub scenario: ScenarioSpec,
    pub seeds: RunSeeds,
    pub hyperparameters: HyperParams,
    pub val_fraction: f64,
    pub inject_after_split: bool,
    /// Source pools.
    pub train_pool: PathBuf,
    pub smdd_manifest: PathBuf,
    pub test_manifest: PathBuf,
    /// Files the run writes, all under `run_dir`.
    pub run_dir: PathBuf,
    pub train_manifest: PathBuf,
    pub val_manifest: PathBuf,
    pub score_path: PathBuf,
}

impl RunSpec {
    /// Run directory relative to the plan's output directory.
    pub fn relative_dir(&self) -> PathBuf {
        PathBuf::from("runs").join(&self.run_id)
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Expands a validated plan into `|rounds| x |scenarios| x |models|` runs,
/// ordered round-major then scenario then model.
pub fn expand_plan(plan: &ExperimentPlan) -> Vec<RunSpec> {
    let mut runs = Vec::with_capacity(plan.rounds.len() * plan.scenarios.len() * plan.models.len());
    for (ri, round) in plan.rounds.iter().enumerate() {
        for (si, scenario) in plan.scenarios.iter().enumerate() {
            for (mi, model) in plan.models.iter().enumerate() {
                let mut seeds = RunSeeds::derive(plan.master_seed, ri, si, mi);
                if let Some(explicit) = scenario.explicit_seed() {
                    seeds.sampling = explicit;
                }
                let spec = scenario.to_spec(seeds.sampling);
                let run_id = format!(
                    "{}-s{si:02}-{}-{}",
                    sanitize(&round.name),
                    spec.tag(),
                    sanitize(&model.name)
                );
                let run_dir = plan.output_dir.join("runs").join(&run_id);
                runs.push(RunSpec {
                    round: round.name.clone(),
                    round_index: ri,
                    scenario_index: si,
                    model_index: mi,
                    model: model.name.clone(),
                    scenario: spec,
                    seeds,
                    hyperparameters: model.effective_hyperparameters(&plan.hyperparameters),
                    val_fraction: plan.val_fraction,
                    inject_after_split: plan.inject_after_split,
                    train_pool: round.train_manifest.clone(),
                    smdd_manifest: plan.smdd_manifest.clone(),
                    test_manifest: round.test_manifest.clone(),
                    train_manifest: run_dir.join("train.csv"),
                    val_manifest: run_dir.join("val.csv"),
                    score_path: run_dir.join("scores.csv"),
                    run_dir,
                    run_id,
                });
            }
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = RunSeeds::derive(42, 0, 1, 0);
        assert_eq!(a, RunSeeds::derive(42, 0, 1, 0));
        assert_ne!(a, RunSeeds::derive(43, 0, 1, 0));
        assert_ne!(a.sampling, a.split);
        let other_model = RunSeeds::derive(42, 0, 1, 1);
        assert_eq!(a.sampling, other_model.sampling);
        assert_eq!(a.split, other_model.split);
        assert_ne!(a.backend, other_model.backend);
        assert_ne!(a.sampling, RunSeeds::derive(42, 1, 0, 0).sampling);
    }

    #[test]
    fn derive_seed_reference_values() {
        // splitmix64(0) is the first output of the reference generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(0, 0, &[]), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn sanitize_replaces_separators() {
        assert_eq!(sanitize("eff net/b2"), "eff_net_b2");
    }
}
