//! Experiment harness and metrics engine for single-image morphing attack
//! detection studies.
//!
//! The crate covers the data side of a study: dataset manifests
//! ([`manifest`]), seeded synthetic bona fide injection ([`sampling`]),
//! error-rate metrics over classifier scores ([`metrics`]), result tables and
//! DET plots ([`report`]), and plan-driven orchestration of scorer backends
//! ([`orchestrator`]). Classifier training itself lives behind the subprocess
//! contract in [`orchestrator::backend`].

pub mod error;
pub mod fixtures;
pub mod manifest;
pub mod metrics;
pub mod orchestrator;
pub mod report;
pub mod sampling;

pub use error::{Error, ErrorKind, Result};
pub use manifest::{
    filter, load_manifest, merge, split_train_val, summarize, validate_manifest, write_manifest,
    DatasetSummary, FilterSpec, Label, Manifest, ManifestEntry, Source, Tool, ValidationReport,
    Variant,
};
pub use metrics::{
    bpcer_at, bpcer_at_macer, deer, det_points, macer_at, probit, sweep, EerResult, ErrorTradeoff,
    OperatingPoint, ScoreRecord, ScoreSet,
};
pub use orchestrator::{ExperimentPlan, HyperParams, RunSpec};
pub use report::RunResult;
pub use sampling::{
    build_scenario, draw_sample, sample_size, SamplePlan, ScenarioKind, ScenarioSpec, SizeMode,
};

/// Rounds half away from zero. Used for every count derived from a ratio.
pub fn round_half_up(x: f64) -> u64 {
    x.round() as u64
}

#[cfg(test)]
mod tests {
    use super::round_half_up;

    #[test]
    fn halves_round_up() {
        assert_eq!(round_half_up(793.5), 794);
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999), 2);
        assert_eq!(round_half_up(0.0), 0);
    }
}
