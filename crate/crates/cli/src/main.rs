use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smad_core::manifest::{load_manifest_unchecked, manifest_to_csv};
use smad_core::metrics::{evaluate, load_scores};
use smad_core::orchestrator::{aggregate, load_config, run_plan, ResultsFile, RunStatus};
use smad_core::report::{det_csv, det_svg_titled, read_det_csv};
use smad_core::sampling::build_scenario_with_plan;
use smad_core::{
    draw_sample, filter, fixtures, load_manifest, split_train_val, summarize, sweep,
    validate_manifest, Error, ErrorKind, FilterSpec, Label, Manifest, ScenarioSpec, SizeMode,
    Source, Tool, Variant,
};

#[derive(Parser)]
#[command(
    name = "smad",
    version,
    about = "Morphing attack detection experiment harness"
)]
struct Cli {
    /// Seed for sampling and splitting; overrides master_seed for `run`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of concurrent runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory for `run`, `report` and `gen-fixtures`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Experiment plan (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check manifests and list every violation.
    ValidateManifest {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Count entries by source, label, variant and tool.
    Summarize {
        manifest: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Draw a seeded sample of synthetic bona fide entries without replacement.
    Sample {
        manifest: PathBuf,
        /// Number of entries to draw.
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded stratified train/validation split.
    Split {
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
    },
    /// Build the training manifest for one scenario.
    BuildScenario {
        #[arg(long)]
        train_pool: PathBuf,
        #[arg(long)]
        smdd: PathBuf,
        #[arg(long, value_enum)]
        kind: ScenarioArg,
        /// Injection percentage (inject only).
        #[arg(long, required_if_eq("kind", "inject"))]
        percent: Option<f64>,
        /// Fixed sample size instead of the percentage formula.
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute D-EER and BPCER operating points from a score CSV.
    Evaluate {
        scores: PathBuf,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the DET curve as CSV.
        #[arg(long)]
        det_csv: Option<PathBuf>,
    },
    /// Plot DET curves from score files or DET CSVs.
    DetSvg {
        /// `label=path` of a score CSV; repeatable.
        #[arg(long = "scores", value_parser = parse_labelled)]
        scores: Vec<(String, PathBuf)>,
        /// `label=path` of a DET CSV; repeatable.
        #[arg(long = "det", value_parser = parse_labelled)]
        det: Vec<(String, PathBuf)>,
        #[arg(long, default_value = "DET curves")]
        title: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a full experiment plan and write the report bundle.
    Run {
        /// Plan file; alternative to --config.
        plan: Option<PathBuf>,
    },
    /// Regenerate the report bundle from an output directory.
    Report { results_dir: Option<PathBuf> },
    /// Write synthetic fixture manifests and an example plan.
    GenFixtures {
        /// Bona fide and morph count of the synthetic pool.
        #[arg(long)]
        smdd_size: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Baseline,
    Inject,
    OnlySynthetic,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, value_delimiter = ',')]
    source: Vec<Source>,
    #[arg(long, value_delimiter = ',')]
    label: Vec<Label>,
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    #[arg(long, value_delimiter = ',')]
    tool: Vec<Tool>,
}

impl FilterArgs {
    fn spec(&self) -> FilterSpec {
        let mut f = FilterSpec::all();
        for &s in &self.source {
            f = f.source(s);
        }
        for &l in &self.label {
            f = f.label(l);
        }
        for &v in &self.variant {
            f = f.variant(v);
        }
        for &t in &self.tool {
            f = f.tool(t);
        }
        f
    }
}

fn parse_labelled(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected `label=path`, got `{s}`")),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Backend => 2,
        ErrorKind::Io => 3,
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn mkdir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn filtered(m: Manifest, args: &FilterArgs) -> Manifest {
    let spec = args.spec();
    if spec == FilterSpec::all() {
        m
    } else {
        filter(&m, &spec)
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::ValidateManifest { manifests, json } => {
            let mut clean = true;
            let mut reports = Vec::new();
            for path in &manifests {
                let report = validate_manifest(&load_manifest_unchecked(path)?);
                clean &= report.is_valid();
                reports.push((path, report));
            }
            if json {
                let doc: Vec<_> = reports
                    .iter()
                    .map(|(p, r)| {
                        serde_json::json!({
                            "path": p.display().to_string(),
                            "valid": r.is_valid(),
                            "violations": r.violations,
                            "warnings": r.warnings,
                        })
                    })
                    .collect();
                write_output(None, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            } else {
                for (path, r) in &reports {
                    if r.is_valid() {
                        println!("{}: ok", path.display());
                    } else {
                        println!("{}: {} violation(s)", path.display(), r.violations.len());
                    }
                    for v in &r.violations {
                        println!("  {v}");
                    }
                    for w in &r.warnings {
                        println!("  warning: {w}");
                    }
                }
            }
            Ok(if clean { 0 } else { 1 })
        }
        Command::Summarize {
            manifest,
            filter,
            json,
        } => {
            let m = filtered(load_manifest(&manifest)?, &filter);
            let summary = summarize(&m);
            let text = if json {
                serde_json::to_string_pretty(&summary.to_json())?
            } else {
                summary.to_string()
            };
            write_output(None, &(text + "\n"))?;
            Ok(0)
        }
        Command::Sample {
            manifest,
            size,
            out,
        } => {
            let spec = FilterSpec::all()
                .source(Source::Smdd)
                .label(Label::Bonafide);
            let pool = filter(&load_manifest(&manifest)?, &spec);
            let sample = draw_sample(&pool, size, seed)?;
            write_output(out.as_deref(), &manifest_to_csv(&sample))?;
            Ok(0)
        }
        Command::Split {
            manifest,
            val_fraction,
            train_out,
            val_out,
        } => {
            let m = load_manifest(&manifest)?;
            let (train, val) = split_train_val(&m, val_fraction, seed)?;
            smad_core::write_manifest(&train, &train_out)?;
            smad_core::write_manifest(&val, &val_out)?;
            eprintln!("train: {} entries, val: {} entries", train.len(), val.len());
            Ok(0)
        }
        Command::BuildScenario {
            train_pool,
            smdd,
            kind,
            percent,
            sample_size,
            out,
        } => {
            let spec = match kind {
                ScenarioArg::Baseline => ScenarioSpec::baseline(),
                ScenarioArg::OnlySynthetic => ScenarioSpec::only_synthetic(),
                ScenarioArg::Inject => {
                    let mode = sample_size.map_or(SizeMode::Formula, SizeMode::Override);
                    ScenarioSpec::inject(percent.unwrap_or_default(), mode, seed)
                }
            };
            let train_pool = load_manifest(&train_pool)?;
            let smdd = load_manifest(&smdd)?;
            let (manifest, plan) = build_scenario_with_plan(&train_pool, &smdd, &spec)?;
            eprintln!(
                "{}: {} synthetic added, {} bona fide, {} morph",
                spec,
                plan.resolved_m,
                manifest.count_label(Label::Bonafide),
                manifest.count_label(Label::Morph)
            );
            write_output(out.as_deref(), &manifest_to_csv(&manifest))?;
            Ok(0)
        }
        Command::Evaluate {
            scores,
            out,
            det_csv: det_path,
        } => {
            let set = load_scores(&scores)?;
            let (evaluation, tradeoff) = evaluate(&set)?;
            if let Some(p) = det_path {
                det_csv(&tradeoff, p)?;
            }
            write_output(
                out.as_deref(),
                &(serde_json::to_string_pretty(&evaluation)? + "\n"),
            )?;
            Ok(0)
        }
        Command::DetSvg {
            scores,
            det,
            title,
            out,
        } => {
            if scores.is_empty() && det.is_empty() {
                return Err(Error::InvalidArgument(
                    "give at least one --scores or --det curve".into(),
                ));
            }
            let mut curves = Vec::new();
            for (label, path) in scores {
                curves.push((label, sweep(&load_scores(&path)?)?));
            }
            for (label, path) in det {
                curves.push((label, read_det_csv(&path)?));
            }
            det_svg_titled(&title, &curves, &out)?;
            Ok(0)
        }
        Command::Run { plan } => {
            let path = plan.or(cli.config).ok_or_else(|| {
                Error::InvalidArgument("`run` needs a plan file (positional or --config)".into())
            })?;
            let mut plan = load_config(&path)?;
            if let Some(dir) = cli.output_dir {
                plan.output_dir = dir;
            }
            if let Some(s) = cli.seed {
                plan.master_seed = s;
            }
            let jobs = cli.jobs.unwrap_or(plan.jobs);
            let outcomes = run_plan(&plan, jobs)?;
            let mut code = 0;
            for o in &outcomes {
                match &o.status {
                    RunStatus::Completed(r) => {
                        eprintln!("ok      {}  D-EER {:.2}%", r.run_id, r.deer * 100.0)
                    }
                    RunStatus::Failed(f, kind) => {
                        eprintln!("failed  {}  {}", f.run_id, f.error);
                        if code == 0 {
                            code = exit_code(*kind);
                        }
                    }
                }
            }
            let results = ResultsFile::from_outcomes(&outcomes);
            if results.results.is_empty() {
                eprintln!("no run completed; report not written");
                return Ok(code.max(1));
            }
            let bundle = aggregate(&results, &plan.output_dir)?;
            eprintln!(
                "{} of {} runs completed; report in {}",
                results.results.len(),
                outcomes.len(),
                bundle
                    .results_file
                    .parent()
                    .unwrap_or(&plan.output_dir)
                    .display()
            );
            Ok(code)
        }
        Command::Report { results_dir } => {
            let dir = match (results_dir, cli.output_dir, cli.config) {
                (Some(d), _, _) | (None, Some(d), _) => d,
                (None, None, Some(config)) => load_config(config)?.output_dir,
                (None, None, None) => PathBuf::from("results"),
            };
            let results = ResultsFile::load(dir.join("report").join("results.json"))?;
            let bundle = aggregate(&results, &dir)?;
            for p in bundle.tables.iter().chain(&bundle.det_plots) {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::GenFixtures { smdd_size } => {
            let dir = cli.output_dir.unwrap_or_else(|| PathBuf::from("fixtures"));
            mkdir(&dir)?;
            let smdd = match smdd_size {
                Some(n) => fixtures::SyntheticDataset {
                    bonafide: n,
                    morphs: n,
                }
                .generate(),
                None => fixtures::smdd(),
            };
            smad_core::write_manifest(&fixtures::feret(), dir.join("feret.csv"))?;
            smad_core::write_manifest(&fixtures::frgc(), dir.join("frgc.csv"))?;
            smad_core::write_manifest(&smdd, dir.join("smdd.csv"))?;
            write_output(Some(&dir.join("plan.json")), EXAMPLE_PLAN)?;
            println!("{}", dir.display());
            Ok(0)
        }
    }
}

const EXAMPLE_PLAN: &str = r#"{
  "schema_version": 1,
  "rounds": [
    { "name": "train_feret_test_frgc", "train_manifest": "feret.csv", "test_manifest": "frgc.csv" },
    { "name": "train_frgc_test_feret", "train_manifest": "frgc.csv", "test_manifest": "feret.csv" }
  ],
  "smdd_manifest": "smdd.csv",
  "scenarios": [
    { "kind": "baseline" },
    { "kind": "inject", "percent": 10 },
    { "kind": "inject", "percent": 20 },
    { "kind": "inject", "percent": 30 },
    { "kind": "inject", "percent": 50 },
    { "kind": "inject", "percent": 75 },
    { "kind": "inject", "percent": 100 },
    { "kind": "only_synthetic" }
  ],
  "models": [
    { "name": "stub", "backend": { "type": "stub", "separation": 2.0 } }
  ],
  "output_dir": "results"
}
"#;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
