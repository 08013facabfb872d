use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn smad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn smad")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SCORES: &str = "\
sample_id,label,score
b1,bonafide,0.1
b2,bonafide,0.2
b3,bonafide,0.6
m1,morph,0.5
m2,morph,0.7
m3,morph,0.9
";

#[test]
fn evaluate_prints_metrics_json() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scores.csv"), SCORES).unwrap();
    let o = smad(
        dir.path(),
        &["evaluate", "scores.csv", "--det-csv", "det.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        (v["n_bonafide"].as_u64(), v["n_morph"].as_u64()),
        (Some(3), Some(3))
    );
    let eer = v["deer"]["eer"].as_f64().unwrap();
    assert!((eer - 1.0 / 3.0).abs() < 1e-12, "{eer}");
    assert_eq!(v["operating_points"].as_array().unwrap().len(), 3);
    let det = fs::read_to_string(dir.path().join("det.csv")).unwrap();
    assert_eq!(det.lines().count(), 7);

    assert_eq!(
        code(&smad(
            dir.path(),
            &["evaluate", "scores.csv", "--out", "m.json"]
        )),
        0
    );
    assert!(fs::read_to_string(dir.path().join("m.json"))
        .unwrap()
        .contains("\"deer\""));
}

#[test]
fn exit_codes_distinguish_validation_and_io() {
    let dir = tempfile::tempdir().unwrap();
    let o = smad(dir.path(), &["evaluate", "missing.csv"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("missing.csv"));

    fs::write(
        dir.path().join("one.csv"),
        "sample_id,label,score\nb,bonafide,0.1\n",
    )
    .unwrap();
    let o = smad(dir.path(), &["evaluate", "one.csv"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    fs::write(
        dir.path().join("nan.csv"),
        "sample_id,label,score\nb,bonafide,NaN\nm,morph,1\n",
    )
    .unwrap();
    assert_eq!(code(&smad(dir.path(), &["evaluate", "nan.csv"])), 1);

    assert_eq!(code(&smad(dir.path(), &["evaluate"])), 1);
    assert_eq!(code(&smad(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&smad(dir.path(), &["--help"])), 0);
}

#[test]
fn validate_manifest_reports_each_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&smad(
            dir.path(),
            &["--output-dir", ".", "gen-fixtures", "--smdd-size", "50"]
        )),
        0
    );
    let o = smad(dir.path(), &["validate-manifest", "feret.csv", "smdd.csv"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("feret.csv: ok"));

    let header = "sample_id,path,label,source,variant,tool,subjects\n";
    fs::write(
        dir.path().join("bad.csv"),
        format!(
            "{header}x,x.png,bonafide,feret,ps300,ubo,s1\nx,y.png,morph,feret,ps300,none,s1;s2\n"
        ),
    )
    .unwrap();
    let o = smad(
        dir.path(),
        &["validate-manifest", "feret.csv", "bad.csv", "--json"],
    );
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["valid"], true);
    assert_eq!(v[1]["valid"], false);
    assert_eq!(v[1]["violations"].as_array().unwrap().len(), 3);

    // Values outside the vocabulary cannot be represented and stop parsing.
    fs::write(
        dir.path().join("vocab.csv"),
        format!("{header}x,x.png,cat,feret,ps300,none,\n"),
    )
    .unwrap();
    let o = smad(dir.path(), &["validate-manifest", "vocab.csv"]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("line 2, column `label`"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn summarize_sample_and_build_scenario() {
    let dir = tempfile::tempdir().unwrap();
    smad(
        dir.path(),
        &["--output-dir", ".", "gen-fixtures", "--smdd-size", "200"],
    );

    let o = smad(
        dir.path(),
        &["summarize", "feret.csv", "--label", "bonafide", "--json"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["bonafide_total"], 1587);

    let a = smad(
        dir.path(),
        &["--seed", "4", "sample", "smdd.csv", "--size", "25"],
    );
    let b = smad(
        dir.path(),
        &["sample", "smdd.csv", "--size", "25", "--seed", "4"],
    );
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rows: Vec<String> = stdout(&a)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(rows.len(), 26);
    assert!(rows[1..].iter().all(|r| r.contains(",bonafide,smdd,")));
    assert_eq!(
        code(&smad(dir.path(), &["sample", "smdd.csv", "--size", "201"])),
        1
    );

    let o = smad(
        dir.path(),
        &[
            "build-scenario",
            "--train-pool",
            "feret.csv",
            "--smdd",
            "smdd.csv",
            "--kind",
            "inject",
            "--percent",
            "10",
            "--sample-size",
            "160",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stderr(&o).contains("160 synthetic added, 1747 bona fide"),
        "{}",
        stderr(&o)
    );
    let missing_percent = smad(
        dir.path(),
        &[
            "build-scenario",
            "--train-pool",
            "feret.csv",
            "--smdd",
            "smdd.csv",
            "--kind",
            "inject",
        ],
    );
    assert_eq!(code(&missing_percent), 1);
}

fn small_plan(dir: &Path, models: &str) {
    smad(
        dir,
        &["--output-dir", ".", "gen-fixtures", "--smdd-size", "3000"],
    );
    let plan = fs::read_to_string(dir.join("plan.json")).unwrap();
    let start = plan.find("\"models\"").unwrap();
    let end = start + plan[start..].find(']').unwrap() + 1;
    let plan = format!("{}\"models\": {models}{}", &plan[..start], &plan[end..]);
    fs::write(dir.join("small.json"), plan).unwrap();
}

#[test]
fn run_and_report_write_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    small_plan(
        dir.path(),
        r#"[{ "name": "stub", "backend": { "type": "stub", "separation": 2.0 } }]"#,
    );
    let o = smad(
        dir.path(),
        &["--jobs", "4", "run", "small.json", "--output-dir", "out"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        stderr(&o).lines().filter(|l| l.starts_with("ok ")).count(),
        16
    );
    let report = dir.path().join("out/report");
    let first = fs::read(report.join("train_feret_test_frgc.csv")).unwrap();

    let o = smad(dir.path(), &["report", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    assert_eq!(
        fs::read(report.join("train_feret_test_frgc.csv")).unwrap(),
        first
    );
    assert!(report.join("train_frgc_test_feret_det.svg").is_file());

    let o = smad(
        dir.path(),
        &[
            "--config",
            "small.json",
            "--output-dir",
            "elsewhere",
            "report",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[cfg(unix)]
#[test]
fn failing_backend_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    small_plan(
        dir.path(),
        r#"[{ "name": "sh", "backend": { "type": "subprocess", "command": ["sh", "-c", "exit 4"] } }]"#,
    );
    let o = smad(dir.path(), &["run", "--config", "small.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("no run completed"));
}

/// The backend runs inside its run directory, so every path in the runspec
/// must resolve from there even when the plan was given relatively.
#[cfg(unix)]
#[test]
fn subprocess_backend_resolves_runspec_paths() {
    let dir = tempfile::tempdir().unwrap();
    let script = r#"field() { sed -n "s/.*\"$1\": \"\(.*\)\",*$/\1/p" "$2"; }
test=$(field test_manifest "$1")
for f in "$test" "$(field train_manifest "$1")" "$(field val_manifest "$1")"; do test -f "$f" || { echo "missing $f" >&2; exit 5; }; done
out=$(field score_path "$1")
printf 'sample_id,label,score\n' > "$out"
grep -v '^#' "$test" | tail -n +2 | awk -F, '{ print $1 "," $3 "," (($3 == "morph") ? 0.8 : 0.2) }' >> "$out""#;
    let command = serde_json::to_string(&["sh", "-c", script, "backend"]).unwrap();
    small_plan(
        dir.path(),
        &format!(
            r#"[{{ "name": "sh", "backend": {{ "type": "subprocess", "command": {command} }} }}]"#
        ),
    );
    let plan = fs::read_to_string(dir.path().join("small.json")).unwrap();
    let plan = plan
        .replace(r#"{ "kind": "inject", "percent": 10 },"#, "")
        .replace(r#"{ "kind": "inject", "percent": 20 },"#, "");
    fs::create_dir(dir.path().join("cfg")).unwrap();
    fs::write(
        dir.path().join("cfg/plan.json"),
        plan.replace("\"feret.csv\"", "\"../feret.csv\"")
            .replace("\"frgc.csv\"", "\"../frgc.csv\"")
            .replace("\"smdd.csv\"", "\"../smdd.csv\""),
    )
    .unwrap();
    let o = smad(
        dir.path(),
        &["run", "cfg/plan.json", "--output-dir", "rel-out"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table =
        fs::read_to_string(dir.path().join("rel-out/report/train_feret_test_frgc.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(
        table
            .lines()
            .skip(1)
            .all(|l| l.split(',').nth(5) == Some("0.00")),
        "{table}"
    );
}
