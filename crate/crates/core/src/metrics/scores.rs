//! Score files: `sample_id,label,score` with labels `bonafide|morph`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Label;

pub const SCORE_HEADER: [&str; 3] = ["sample_id", "label", "score"];

/// One classifier output. Higher scores are more morph-like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub records: Vec<ScoreRecord>,
}

impl ScoreSet {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !r.score.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "score for `{}` is not finite",
                bad.sample_id
            )));
        }
        Ok(ScoreSet { records })
    }

    /// Builds a set from bare score lists, with generated ids.
    pub fn from_scores(bonafide: &[f64], morph: &[f64]) -> Result<Self> {
        let records = bonafide
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoreRecord {
                sample_id: format!("bf-{i}"),
                label: Label::Bonafide,
                score,
            })
            .chain(morph.iter().enumerate().map(|(i, &score)| ScoreRecord {
                sample_id: format!("m-{i}"),
                label: Label::Morph,
                score,
            }))
            .collect();
        ScoreSet::new(records)
    }

    pub fn n_morph(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Label::Morph)
            .count()
    }

    pub fn n_bonafide(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Label::Bonafide)
            .count()
    }

    pub fn scores(&self, label: Label) -> impl Iterator<Item = f64> + '_ {
        self.records
            .iter()
            .filter(move |r| r.label == label)
            .map(|r| r.score)
    }
}

pub fn parse_scores(text: &str) -> Result<ScoreSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| csv_schema(&e, "header"))?
        .clone();
    let found: Vec<&str> = header.iter().collect();
    if found != SCORE_HEADER {
        return Err(Error::Schema {
            line: 1,
            column: "header".into(),
            message: format!(
                "expected `{}`, found `{}`",
                SCORE_HEADER.join(","),
                found.join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_schema(&e, "-"))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let schema = |column: &str, message: String| Error::Schema {
            line,
            column: column.into(),
            message,
        };
        let sample_id = record.get(0).unwrap_or("");
        if sample_id.is_empty() {
            return Err(schema("sample_id", "sample_id must not be empty".into()));
        }
        let label = record
            .get(1)
            .unwrap_or("")
            .parse::<Label>()
            .map_err(|m| schema("label", m))?;
        let raw = record.get(2).unwrap_or("");
        if !is_decimal_literal(raw) {
            return Err(schema(
                "score",
                format!("`{raw}` is not a finite decimal number"),
            ));
        }
        let score: f64 = raw
            .parse()
            .map_err(|_| schema("score", format!("`{raw}` is not a number")))?;
        if !score.is_finite() {
            return Err(schema("score", format!("`{raw}` is out of range")));
        }
        records.push(ScoreRecord {
            sample_id: sample_id.to_string(),
            label,
            score,
        });
    }
    ScoreSet::new(records)
}

/// Accepts `[+-]digits[.digits][(e|E)[+-]digits]`; rejects `nan`, `inf` and
/// friends that `f64::from_str` would take.
fn is_decimal_literal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return false;
    }
    match exponent {
        None => true,
        Some(e) => {
            let e = e.strip_prefix(['+', '-']).unwrap_or(e);
            !e.is_empty() && digits(e)
        }
    }
}

fn csv_schema(e: &csv::Error, column: &str) -> Error {
    Error::Schema {
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        column: column.into(),
        message: e.to_string(),
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

/// Scores are written with the shortest representation that parses back to
/// the same `f64`.
pub fn scores_to_csv(scores: &ScoreSet) -> String {
    let mut out = String::from("sample_id,label,score\n");
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in &scores.records {
        writer
            .write_record([r.sample_id.as_str(), r.label.as_str(), &r.score.to_string()])
            .expect("writing to Vec cannot fail");
    }
    let bytes = writer.into_inner().expect("flushing Vec cannot fail");
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
    out
}

pub fn write_scores(scores: &ScoreSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scores_to_csv(scores)).map_err(|e| Error::io(path, e))
}
