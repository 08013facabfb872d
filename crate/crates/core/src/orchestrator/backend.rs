//! Scorer backends.
//!
//! Subprocess contract: the harness writes `runspec.json` into the run
//! directory and invokes the backend command with that path. The backend must
//! exit 0 after writing a score CSV (`sample_id,label,score`) to the
//! `score_path` named in the runspec. Its stderr is captured to `backend.log`
//! and its stdout to `backend.stdout.log`, both in the run directory.

use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Stdio};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{BackendConfig, CommandTemplate};
use super::RunSpec;
use crate::error::{Error, Result};
use crate::manifest::{Label, Manifest};
use crate::metrics::{write_scores, ScoreRecord, ScoreSet};

pub const RUNSPEC_PLACEHOLDER: &str = "{runspec}";

pub trait ScorerBackend: Send + Sync {
    /// Produces the score file at `run.score_path` for every entry of `test`.
    fn score(&self, run: &RunSpec, test: &Manifest, runspec: &Path) -> Result<()>;
}

/// Test double for a trained classifier: bona fide logits ~ N(0, 1), morph
/// logits ~ N(separation, 1), mapped through the logistic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubBackend {
    pub separation: f64,
}

/// Stub scores for every entry of `test`, in manifest order.
pub fn stub_scores(test: &Manifest, separation: f64, seed: u64) -> ScoreSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = test
        .entries
        .iter()
        .map(|e| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let logit = match e.label {
                Label::Bonafide => z,
                Label::Morph => z + separation,
            };
            ScoreRecord {
                sample_id: e.sample_id.clone(),
                label: e.label,
                score: 1.0 / (1.0 + (-logit).exp()),
            }
        })
        .collect();
    ScoreSet { records }
}

impl ScorerBackend for StubBackend {
    fn score(&self, run: &RunSpec, test: &Manifest, _runspec: &Path) -> Result<()> {
        let scores = stub_scores(test, self.separation, run.seeds.backend);
        write_scores(&scores, &run.score_path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubprocessBackend {
    pub command: CommandTemplate,
}

impl SubprocessBackend {
    pub fn command_line(&self, runspec: &Path) -> Vec<String> {
        let path = runspec.to_string_lossy();
        let mut args = self.command.args();
        if args.iter().any(|a| a.contains(RUNSPEC_PLACEHOLDER)) {
            for a in &mut args {
                *a = a.replace(RUNSPEC_PLACEHOLDER, &path);
            }
        } else {
            args.push(path.into_owned());
        }
        args
    }
}

impl ScorerBackend for SubprocessBackend {
    fn score(&self, run: &RunSpec, _test: &Manifest, runspec: &Path) -> Result<()> {
        let args = self.command_line(runspec);
        let log = run.run_dir.join("backend.log");
        let stdout_log = run.run_dir.join("backend.stdout.log");
        let stderr = File::create(&log).map_err(|e| Error::io(&log, e))?;
        let stdout = File::create(&stdout_log).map_err(|e| Error::io(&stdout_log, e))?;
        let fail = |message: String| Error::Backend {
            run_id: run.run_id.clone(),
            message,
            log: log.clone(),
        };
        let (program, rest) = args
            .split_first()
            .ok_or_else(|| fail("empty backend command".into()))?;
        let status = Command::new(program)
            .args(rest)
            .current_dir(&run.run_dir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .status()
            .map_err(|e| fail(format!("cannot start `{program}`: {e}")))?;
        if !status.success() {
            let tail = fs::read_to_string(&log).unwrap_or_default();
            let tail: Vec<&str> = tail.lines().rev().take(5).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            return Err(fail(format!(
                "`{}` exited with {status}{}",
                args.join(" "),
                if tail.is_empty() {
                    String::new()
                } else {
                    format!("; stderr tail: {}", tail.join(" | "))
                }
            )));
        }
        Ok(())
    }
}

/// Backend selected by a model entry of the plan.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Stub(StubBackend),
    Subprocess(SubprocessBackend),
}

impl From<&BackendConfig> for Backend {
    fn from(c: &BackendConfig) -> Self {
        match c {
            BackendConfig::Stub { separation } => Backend::Stub(StubBackend {
                separation: *separation,
            }),
            BackendConfig::Subprocess { command } => Backend::Subprocess(SubprocessBackend {
                command: command.clone(),
            }),
        }
    }
}

impl ScorerBackend for Backend {
    fn score(&self, run: &RunSpec, test: &Manifest, runspec: &Path) -> Result<()> {
        match self {
            Backend::Stub(b) => b.score(run, test, runspec),
            Backend::Subprocess(b) => b.score(run, test, runspec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::SyntheticDataset;
    use crate::metrics::{deer, sweep};

    #[test]
    fn placeholder_substitution() {
        let b = SubprocessBackend {
            command: CommandTemplate::Line("python3 train.py --spec={runspec}".into()),
        };
        assert_eq!(
            b.command_line(Path::new("/r/runspec.json")),
            ["python3", "train.py", "--spec=/r/runspec.json"]
        );
        let b = SubprocessBackend {
            command: CommandTemplate::Args(vec!["score".into()]),
        };
        assert_eq!(b.command_line(Path::new("x.json")), ["score", "x.json"]);
    }

    #[test]
    fn stub_is_seeded_and_bounded() {
        let test = SyntheticDataset {
            bonafide: 50,
            morphs: 50,
        }
        .generate();
        let a = stub_scores(&test, 1.0, 4);
        assert_eq!(a, stub_scores(&test, 1.0, 4));
        assert_ne!(a, stub_scores(&test, 1.0, 5));
        assert!(a.records.iter().all(|r| r.score > 0.0 && r.score < 1.0));
        assert_eq!(a.records.len(), 100);
    }

    #[test]
    fn stub_separation_extremes() {
        let test = SyntheticDataset {
            bonafide: 5000,
            morphs: 5000,
        }
        .generate();
        let far = deer(&sweep(&stub_scores(&test, 100.0, 1)).unwrap());
        assert_eq!(far.eer, 0.0);
        let same = deer(&sweep(&stub_scores(&test, 0.0, 1)).unwrap());
        assert!((same.eer - 0.5).abs() < 0.02, "{}", same.eer);
    }
}
