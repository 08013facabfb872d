use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{Backend, ScorerBackend};
use super::config::{ExperimentPlan, SCHEMA_VERSION};
use super::{expand_plan, sanitize, RunSpec};
use crate::error::{Error, ErrorKind, Result};
use crate::manifest::{
    load_manifest, split_train_val, subject_overlap_warnings, write_manifest, Label, Manifest,
};
use crate::metrics::{evaluate, load_scores, ScoreSet};
use crate::report::{det_csv, det_svg_titled, read_det_csv, render_table, RoundKind, RunResult};
use crate::sampling::{apply_plan, build_scenario_with_plan, SamplePlan, ScenarioKind};

/// Manifests a run reads. Shared across runs of the same round.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub train_pool: Arc<Manifest>,
    pub test: Arc<Manifest>,
    pub smdd: Arc<Manifest>,
}

#[derive(Serialize)]
struct RunspecFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    run: &'a RunSpec,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Checks that `scores` holds exactly one record per test sample with the
/// manifest's label.
pub fn check_coverage(test: &Manifest, scores: &ScoreSet, path: &Path) -> Result<()> {
    let expected: HashMap<&str, Label> = test
        .entries
        .iter()
        .map(|e| (e.sample_id.as_str(), e.label))
        .collect();
    let mut seen = HashSet::new();
    let (mut unknown, mut duplicates, mut mismatched) = (Vec::new(), Vec::new(), Vec::new());
    for r in &scores.records {
        match expected.get(r.sample_id.as_str()) {
            None => unknown.push(r.sample_id.as_str()),
            Some(&label) => {
                if !seen.insert(r.sample_id.as_str()) {
                    duplicates.push(r.sample_id.as_str());
                } else if label != r.label {
                    mismatched.push(r.sample_id.as_str());
                }
            }
        }
    }
    let missing = expected.len() - seen.len();
    if missing == 0 && unknown.is_empty() && duplicates.is_empty() && mismatched.is_empty() {
        return Ok(());
    }
    let mut problems = Vec::new();
    if missing > 0 {
        problems.push(format!(
            "{missing} of {} test samples missing",
            expected.len()
        ));
    }
    let mut list = |what: &str, ids: &[&str]| {
        if !ids.is_empty() {
            problems.push(format!("{} {what} (first: `{}`)", ids.len(), ids[0]));
        }
    };
    list("unknown sample ids", &unknown);
    list("duplicated sample ids", &duplicates);
    list("label mismatches", &mismatched);
    Err(Error::Coverage {
        path: path.to_path_buf(),
        message: problems.join("; "),
    })
}

/// Builds the scenario manifests, invokes the backend and evaluates its
/// scores. Writes only under `run.run_dir`.
pub fn execute_run(
    run: &RunSpec,
    backend: &dyn ScorerBackend,
    inputs: &RunInputs,
) -> Result<RunResult> {
    fs::create_dir_all(&run.run_dir).map_err(|e| Error::io(&run.run_dir, e))?;
    match fs::remove_file(&run.score_path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => {
            return Err(Error::io(&run.score_path, e));
        }
        _ => {}
    }

    let (train, val, plan): (Manifest, Manifest, SamplePlan) = if run.inject_after_split
        && matches!(run.scenario.kind, ScenarioKind::Inject { .. })
    {
        let plan = SamplePlan::resolve(&inputs.train_pool, &inputs.smdd, &run.scenario)?;
        let (train, val) = split_train_val(&inputs.train_pool, run.val_fraction, run.seeds.split)?;
        (apply_plan(&train, &inputs.smdd, &plan)?, val, plan)
    } else {
        let (scenario, plan) =
            build_scenario_with_plan(&inputs.train_pool, &inputs.smdd, &run.scenario)?;
        let (train, val) = split_train_val(&scenario, run.val_fraction, run.seeds.split)?;
        (train, val, plan)
    };
    let total_bonafide = train.count_label(Label::Bonafide) + val.count_label(Label::Bonafide);

    write_manifest(&train, &run.train_manifest)?;
    write_manifest(&val, &run.val_manifest)?;
    let mut warnings = subject_overlap_warnings(&train, &val).join("\n");
    if !warnings.is_empty() {
        warnings.push('\n');
    }
    write_file(&run.run_dir.join("split_warnings.txt"), warnings)?;

    let runspec = run.run_dir.join("runspec.json");
    let doc = RunspecFile {
        schema_version: SCHEMA_VERSION,
        run,
    };
    write_file(&runspec, serde_json::to_string_pretty(&doc)? + "\n")?;

    backend.score(run, &inputs.test, &runspec)?;

    if !run.score_path.is_file() {
        return Err(Error::Coverage {
            path: run.score_path.clone(),
            message: "backend did not write the score file".into(),
        });
    }
    let scores = load_scores(&run.score_path)?;
    check_coverage(&inputs.test, &scores, &run.score_path)?;

    let (evaluation, tradeoff) = evaluate(&scores)?;
    det_csv(&tradeoff, run.run_dir.join("det.csv"))?;
    write_file(
        &run.run_dir.join("metrics.json"),
        serde_json::to_string_pretty(&evaluation)? + "\n",
    )?;

    let bpcer = |alpha: f64| {
        evaluation
            .bpcer_at(alpha)
            .expect("standard operating point")
    };
    Ok(RunResult {
        run_id: run.run_id.clone(),
        round: run.round.clone(),
        round_kind: RoundKind::from_name(&run.round),
        model: run.model.clone(),
        scenario: run.scenario,
        sample_size: plan.resolved_m,
        total_bonafide,
        deer: evaluation.deer.eer,
        deer_bracket: evaluation.deer.bracket,
        bpcer5: bpcer(0.05),
        bpcer10: bpcer(0.10),
        bpcer20: bpcer(0.20),
        tradeoff_ref: format!("runs/{}/det.csv", run.run_id),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub round: String,
    pub model: String,
    pub scenario: String,
    /// `validation`, `backend` or `io`.
    pub kind: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed(RunResult),
    Failed(RunFailure, ErrorKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub status: RunStatus,
}

#[derive(Serialize)]
struct RunLogEntry<'a> {
    run_id: &'a str,
    status: &'a str,
    started_unix_ms: u128,
    duration_ms: u128,
    error: Option<String>,
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Validation => "validation",
        ErrorKind::Backend => "backend",
        ErrorKind::Io => "io",
    }
}

/// Loads every manifest the plan references and executes all runs with up to
/// `jobs` runs in flight. Failed runs are reported, not dropped. Timing goes
/// to `run_log.json`; nothing else written depends on the clock.
///
/// Relative paths are resolved against the current directory first, since
/// backends run inside their run directory.
pub fn run_plan(plan: &ExperimentPlan, jobs: usize) -> Result<Vec<RunOutcome>> {
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let mut plan = plan.clone();
    plan.resolve_paths(&cwd);
    let plan = &plan;
    let mut cache: HashMap<PathBuf, Arc<Manifest>> = HashMap::new();
    let mut load = |p: &Path| -> Result<Arc<Manifest>> {
        if let Some(m) = cache.get(p) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(load_manifest(p)?);
        cache.insert(p.to_path_buf(), Arc::clone(&m));
        Ok(m)
    };
    let smdd = load(&plan.smdd_manifest)?;
    let mut round_inputs = Vec::new();
    for r in &plan.rounds {
        round_inputs.push(RunInputs {
            train_pool: load(&r.train_manifest)?,
            test: load(&r.test_manifest)?,
            smdd: Arc::clone(&smdd),
        });
    }
    let backends: Vec<Backend> = plan
        .models
        .iter()
        .map(|m| Backend::from(&m.backend))
        .collect();
    let specs = expand_plan(plan);
    let runs_dir = plan.output_dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let timed: Vec<(RunOutcome, u128, u128)> = pool.install(|| {
        specs
            .into_par_iter()
            .map(|spec| {
                let started = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_millis())
                    .unwrap_or(0);
                let clock = Instant::now();
                let result = execute_run(
                    &spec,
                    &backends[spec.model_index],
                    &round_inputs[spec.round_index],
                );
                let status = match result {
                    Ok(r) => RunStatus::Completed(r),
                    Err(e) => RunStatus::Failed(
                        RunFailure {
                            run_id: spec.run_id.clone(),
                            round: spec.round.clone(),
                            model: spec.model.clone(),
                            scenario: spec.scenario.tag(),
                            kind: kind_name(e.kind()).into(),
                            error: e.to_string(),
                        },
                        e.kind(),
                    ),
                };
                (
                    RunOutcome { spec, status },
                    started,
                    clock.elapsed().as_millis(),
                )
            })
            .collect()
    });

    let log: Vec<RunLogEntry> = timed
        .iter()
        .map(|(o, started, duration)| {
            let (status, error) = match &o.status {
                RunStatus::Completed(_) => ("completed", None),
                RunStatus::Failed(f, _) => ("failed", Some(f.error.clone())),
            };
            RunLogEntry {
                run_id: &o.spec.run_id,
                status,
                started_unix_ms: *started,
                duration_ms: *duration,
                error,
            }
        })
        .collect();
    write_file(
        &plan.output_dir.join("run_log.json"),
        serde_json::to_string_pretty(&log)? + "\n",
    )?;
    Ok(timed.into_iter().map(|(o, _, _)| o).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub results: Vec<RunResult>,
    pub failed: Vec<RunFailure>,
}

impl ResultsFile {
    pub fn from_outcomes(outcomes: &[RunOutcome]) -> Self {
        let mut results = Vec::new();
        let mut failed = Vec::new();
        for o in outcomes {
            match &o.status {
                RunStatus::Completed(r) => results.push(r.clone()),
                RunStatus::Failed(f, _) => failed.push(f.clone()),
            }
        }
        ResultsFile {
            schema_version: SCHEMA_VERSION,
            results,
            failed,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Files produced by [`aggregate`], all under `output_dir/report`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub results_file: PathBuf,
    pub tables: Vec<PathBuf>,
    pub det_plots: Vec<PathBuf>,
}

/// Writes `results.json`, a table (CSV and text) and a DET plot per round.
/// Only completed runs appear in tables and plots.
pub fn aggregate(results: &ResultsFile, output_dir: &Path) -> Result<ReportBundle> {
    if results.results.is_empty() {
        return Err(Error::InvalidArgument(
            "no completed runs to aggregate".into(),
        ));
    }
    let report_dir = output_dir.join("report");
    fs::create_dir_all(&report_dir).map_err(|e| Error::io(&report_dir, e))?;
    let mut bundle = ReportBundle {
        results_file: report_dir.join("results.json"),
        ..Default::default()
    };
    write_file(
        &bundle.results_file,
        serde_json::to_string_pretty(results)? + "\n",
    )?;

    let mut order: Vec<&str> = Vec::new();
    let mut by_round: BTreeMap<&str, Vec<RunResult>> = BTreeMap::new();
    for r in &results.results {
        if !by_round.contains_key(r.round.as_str()) {
            order.push(&r.round);
        }
        by_round.entry(&r.round).or_default().push(r.clone());
    }
    let multi_model = {
        let models: HashSet<&str> = results.results.iter().map(|r| r.model.as_str()).collect();
        models.len() > 1
    };
    for round in order {
        let rows = &by_round[round];
        let stem = sanitize(round);
        let doc = render_table(rows)?;
        let csv_path = report_dir.join(format!("{stem}.csv"));
        let txt_path = report_dir.join(format!("{stem}.txt"));
        write_file(&csv_path, &doc.csv)?;
        write_file(&txt_path, &doc.text)?;
        bundle.tables.extend([csv_path, txt_path]);

        let curves = rows
            .iter()
            .map(|r| {
                let label = if multi_model {
                    format!("{} {}", r.model, r.scenario.additional_data())
                } else {
                    r.scenario.additional_data()
                };
                Ok((label, read_det_csv(output_dir.join(&r.tradeoff_ref))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let svg_path = report_dir.join(format!("{stem}_det.svg"));
        det_svg_titled(&format!("DET curves: {round}"), &curves, &svg_path)?;
        bundle.det_plots.push(svg_path);
    }
    Ok(bundle)
}
