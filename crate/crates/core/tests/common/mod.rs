//! Independent brute-force oracles and generators shared by the integration
//! tests. Nothing here calls into the metric code under test.

#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smad_core::{Label, ScoreRecord, ScoreSet};

/// One discrete operating point: (threshold, bpcer, macer).
pub type Point = (f64, f64, f64);

/// Every distinct score plus both infinities, each rate counted from scratch.
pub fn brute_sweep(bona: &[f64], morph: &[f64]) -> Vec<Point> {
    let mut ts: Vec<f64> = bona.iter().chain(morph).copied().collect();
    ts.push(f64::NEG_INFINITY);
    ts.push(f64::INFINITY);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.iter()
        .map(|&t| {
            let rejected = bona.iter().filter(|&&s| s >= t).count();
            let missed = morph.iter().filter(|&&s| s < t).count();
            (
                t,
                rejected as f64 / bona.len() as f64,
                missed as f64 / morph.len() as f64,
            )
        })
        .collect()
}

/// Crossing value of the polyline with the diagonal, located by scanning
/// every segment for a sign change of bpcer - macer.
pub fn brute_eer(points: &[Point]) -> f64 {
    for w in points.windows(2) {
        let (_, b0, m0) = w[0];
        let (_, b1, m1) = w[1];
        let (d0, d1) = (b0 - m0, b1 - m1);
        if d0 == 0.0 {
            return b0;
        }
        if d0 > 0.0 && d1 <= 0.0 {
            return (d0 * b1 - d1 * b0) / (d0 - d1);
        }
    }
    panic!("polyline never reaches the diagonal")
}

pub fn brute_bracket(points: &[Point]) -> (f64, f64) {
    let lo = points
        .iter()
        .map(|p| p.1.min(p.2))
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = points
        .iter()
        .map(|p| p.1.max(p.2))
        .fold(f64::INFINITY, f64::min);
    (lo, hi)
}

/// (bpcer, threshold): minimum bpcer over admissible thresholds, and the
/// largest admissible threshold.
pub fn brute_bpcer_at(points: &[Point], alpha: f64) -> (f64, f64) {
    let admissible: Vec<&Point> = points.iter().filter(|p| p.2 <= alpha).collect();
    let best = admissible.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let t = admissible
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, t)
}

pub fn score_set(bona: &[f64], morph: &[f64]) -> ScoreSet {
    ScoreSet::from_scores(bona, morph).unwrap()
}

/// Random class sizes in 1..=max_per_class; about half the scores come from
/// a coarse grid so that ties within and across classes are common.
pub fn random_scores(rng: &mut ChaCha8Rng, max_per_class: usize) -> (Vec<f64>, Vec<f64>) {
    let shift: f64 = rng.random_range(-0.5..1.5);
    let draw = |n: usize, offset: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    f64::from(rng.random_range(0u8..=20)) / 20.0
                } else {
                    rng.random::<f64>() + offset
                }
            })
            .collect()
    };
    let nb = rng.random_range(1..=max_per_class);
    let nm = rng.random_range(1..=max_per_class);
    let bona = draw(nb, 0.0, rng);
    let morph = draw(nm, shift * 0.5, rng);
    (bona, morph)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn negated_swapped(s: &ScoreSet) -> ScoreSet {
    ScoreSet::new(
        s.records
            .iter()
            .map(|r| ScoreRecord {
                sample_id: r.sample_id.clone(),
                label: match r.label {
                    Label::Bonafide => Label::Morph,
                    Label::Morph => Label::Bonafide,
                },
                score: -r.score,
            })
            .collect(),
    )
    .unwrap()
}

/// `(p, z)` rows of the frozen high-precision quantile table.
pub fn probit_oracle() -> Vec<(f64, f64)> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/probit_oracle.csv");
    let text = std::fs::read_to_string(&path).expect("probit oracle fixture");
    text.lines()
        .skip(1)
        .map(|l| {
            let (p, z) = l.split_once(',').expect("two columns");
            (p.parse().unwrap(), z.parse().unwrap())
        })
        .collect()
}

/// Writes the full-size fixture manifests and returns a stub plan over
/// them: both cross-dataset rounds, the eight study scenarios, one model.
pub fn write_fixture_plan(dir: &Path, output_dir: &Path, models: &str) -> String {
    use smad_core::fixtures;
    smad_core::write_manifest(&fixtures::feret(), dir.join("feret.csv")).unwrap();
    smad_core::write_manifest(&fixtures::frgc(), dir.join("frgc.csv")).unwrap();
    smad_core::write_manifest(&fixtures::smdd(), dir.join("smdd.csv")).unwrap();
    let p = |name: &str| serde_json::to_string(&dir.join(name)).unwrap();
    format!(
        r#"{{
  "schema_version": 1,
  "rounds": [
    {{ "name": "train_feret_test_frgc", "train_manifest": {feret}, "test_manifest": {frgc} }},
    {{ "name": "train_frgc_test_feret", "train_manifest": {frgc}, "test_manifest": {feret} }}
  ],
  "smdd_manifest": {smdd},
  "scenarios": [
    {{ "kind": "baseline" }},
    {{ "kind": "inject", "percent": 10 }},
    {{ "kind": "inject", "percent": 20 }},
    {{ "kind": "inject", "percent": 30 }},
    {{ "kind": "inject", "percent": 50 }},
    {{ "kind": "inject", "percent": 75 }},
    {{ "kind": "inject", "percent": 100 }},
    {{ "kind": "only_synthetic" }}
  ],
  "models": {models},
  "master_seed": 7,
  "output_dir": {out}
}}"#,
        feret = p("feret.csv"),
        frgc = p("frgc.csv"),
        smdd = p("smdd.csv"),
        out = serde_json::to_string(output_dir).unwrap(),
    )
}

pub const ONE_STUB: &str =
    r#"[{ "name": "stub", "backend": { "type": "stub", "separation": 2.0 } }]"#;

/// Every file under `root` with its bytes, sorted by relative path.
pub fn snapshot(root: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, skip: &[&str], out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            if path.is_dir() {
                walk(&path, root, skip, out);
            } else if !skip.iter().any(|s| rel.ends_with(s)) {
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, skip, &mut out);
    out.sort();
    out
}
