//! Dataset manifests: the sample lists that stand in for image datasets.
//!
//! A manifest never holds pixels. Each row names one image by path together
//! with its class label, source dataset, processing variant, morphing tool and
//! contributing subjects. Everything downstream (sampling, splitting, scoring
//! coverage checks) works on these rows.
//!
//! On disk a manifest is a UTF-8 CSV with the header
//! `sample_id,path,label,source,variant,tool,subjects`. Provenance is kept in
//! `#`-prefixed lines before the header.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::round_half_up;

pub const MANIFEST_HEADER: [&str; 7] = [
    "sample_id",
    "path",
    "label",
    "source",
    "variant",
    "tool",
    "subjects",
];

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($name).to_lowercase(),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

vocabulary!(
    /// Class label. Bona fide is the negative class, morph the attack class.
    Label { Bonafide => "bonafide", Morph => "morph" }
);

vocabulary!(
    /// Dataset a sample originates from.
    Source { Feret => "feret", Frgc => "frgc", Smdd => "smdd", Other => "other" }
);

vocabulary!(
    /// Image processing variant.
    Variant { Ps300 => "ps300", Ps600 => "ps600", Resized => "resized", Synthetic => "synthetic" }
);

vocabulary!(
    /// Morphing tool. Bona fide samples always carry `none`.
    Tool {
        Facefusion => "facefusion",
        Facemorpher => "facemorpher",
        Opencv => "opencv",
        Ubo => "ubo",
        Gan => "gan",
        None => "none",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub path: String,
    pub label: Label,
    pub source: Source,
    pub variant: Variant,
    pub tool: Tool,
    pub subjects: Vec<String>,
}

impl ManifestEntry {
    /// Checks the per-row invariants, returning the offending column and a
    /// message on failure.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.sample_id.is_empty() {
            return Err(("sample_id", "sample_id must not be empty".into()));
        }
        if self.path.is_empty() {
            return Err(("path", "path must not be empty".into()));
        }
        if self.subjects.iter().any(String::is_empty) {
            return Err(("subjects", "subject ids must not be empty".into()));
        }
        match self.label {
            Label::Bonafide => {
                if self.tool != Tool::None {
                    return Err((
                        "tool",
                        format!(
                            "bona fide sample must have tool `none`, found `{}`",
                            self.tool
                        ),
                    ));
                }
                if self.subjects.len() > 1 {
                    return Err((
                        "subjects",
                        format!(
                            "bona fide sample lists {} subjects (at most 1 allowed)",
                            self.subjects.len()
                        ),
                    ));
                }
            }
            Label::Morph => {
                if self.tool == Tool::None {
                    return Err(("tool", "morph sample must name a morphing tool".into()));
                }
                if !matches!(self.subjects.len(), 0 | 2) {
                    return Err((
                        "subjects",
                        format!(
                            "morph sample lists {} subjects (must be 0 or 2)",
                            self.subjects.len()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Free-text lineage, one line per element.
    pub provenance: Vec<String>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, provenance: Vec<String>) -> Self {
        Manifest {
            entries,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.sample_id.as_str())
    }

    fn derived(&self, entries: Vec<ManifestEntry>, note: String) -> Manifest {
        let mut provenance = self.provenance.clone();
        provenance.push(note);
        Manifest {
            entries,
            provenance,
        }
    }
}

// ---------------------------------------------------------------------------
// CSV I/O

/// Parses manifest CSV text without enforcing entry invariants or id
/// uniqueness. `validate_manifest` reports those.
pub fn parse_manifest_unchecked(text: &str) -> Result<Manifest> {
    let mut provenance = Vec::new();
    let mut offset = 0usize;
    let mut rest = text;
    while rest.starts_with('#') {
        let (line, tail) = match rest.find('\n') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let line = line.strip_suffix('\r').unwrap_or(line);
        let line = line.strip_prefix('#').unwrap_or(line);
        provenance.push(line.strip_prefix(' ').unwrap_or(line).to_string());
        offset += 1;
        rest = tail;
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(rest.as_bytes());

    let header = reader.headers().map_err(|e| csv_error(e, offset))?.clone();
    if header.is_empty() || (header.len() == 1 && header.get(0) == Some("")) {
        return Err(Error::Schema {
            line: offset + 1,
            column: "header".into(),
            message: "missing header row".into(),
        });
    }
    for (i, expected) in MANIFEST_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(found) if found == *expected => {}
            Some(found) => {
                return Err(Error::Schema {
                    line: offset + 1,
                    column: (*expected).into(),
                    message: format!("expected header column `{expected}`, found `{found}`"),
                })
            }
            None => {
                return Err(Error::Schema {
                    line: offset + 1,
                    column: (*expected).into(),
                    message: "missing header column".into(),
                })
            }
        }
    }
    if header.len() != MANIFEST_HEADER.len() {
        return Err(Error::Schema {
            line: offset + 1,
            column: header.get(MANIFEST_HEADER.len()).unwrap_or("").into(),
            message: "unexpected extra header column".into(),
        });
    }

    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, offset))?;
        let line = offset + record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let label = field(2)
            .parse::<Label>()
            .map_err(|m| schema(line, "label", m))?;
        let source = field(3)
            .parse::<Source>()
            .map_err(|m| schema(line, "source", m))?;
        let variant = field(4)
            .parse::<Variant>()
            .map_err(|m| schema(line, "variant", m))?;
        let tool = field(5)
            .parse::<Tool>()
            .map_err(|m| schema(line, "tool", m))?;
        let subjects = match field(6) {
            "" => Vec::new(),
            s => s.split(';').map(str::to_string).collect(),
        };
        entries.push(ManifestEntry {
            sample_id: field(0).to_string(),
            path: field(1).to_string(),
            label,
            source,
            variant,
            tool,
            subjects,
        });
    }
    Ok(Manifest {
        entries,
        provenance,
    })
}

/// Parses manifest CSV text and rejects any invariant violation.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let manifest = parse_manifest_unchecked(text)?;
    let header_line = manifest.provenance.len() + 1;
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        if let Err((column, message)) = entry.check() {
            return Err(schema(
                header_line + i + 1,
                column,
                format!("row {} (`{}`): {message}", i + 1, entry.sample_id),
            ));
        }
        if let Some(first) = seen.insert(entry.sample_id.as_str(), i) {
            return Err(Error::DuplicateSampleId {
                sample_id: entry.sample_id.clone(),
                first: first + 1,
                second: i + 1,
            });
        }
    }
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn load_manifest_unchecked(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_unchecked(&text)
}

/// Canonical CSV rendering: provenance comments, fixed header order, LF line
/// endings.
pub fn manifest_to_csv(m: &Manifest) -> String {
    let mut out = String::new();
    for line in m.provenance.iter().flat_map(|p| p.split('\n')) {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(MANIFEST_HEADER)
        .expect("writing to Vec cannot fail");
    for e in &m.entries {
        let subjects = e.subjects.join(";");
        writer
            .write_record([
                e.sample_id.as_str(),
                e.path.as_str(),
                e.label.as_str(),
                e.source.as_str(),
                e.variant.as_str(),
                e.tool.as_str(),
                subjects.as_str(),
            ])
            .expect("writing to Vec cannot fail");
    }
    let bytes = writer.into_inner().expect("flushing Vec cannot fail");
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is UTF-8"));
    out
}

pub fn write_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_to_csv(m)).map_err(|e| Error::io(path, e))
}

fn schema(line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        column: column.into(),
        message: message.into(),
    }
}

fn csv_error(e: csv::Error, offset: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0) + offset;
    schema(line, "-", e.to_string())
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A row breaks one of the per-entry invariants. `row` is 1-based.
    Entry {
        row: usize,
        sample_id: String,
        column: String,
        message: String,
    },
    DuplicateSampleId {
        sample_id: String,
        first_row: usize,
        second_row: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Entry {
                row,
                sample_id,
                column,
                message,
            } => write!(f, "row {row} `{sample_id}` [{column}]: {message}"),
            Violation::DuplicateSampleId {
                sample_id,
                first_row,
                second_row,
            } => write!(
                f,
                "duplicate sample_id `{sample_id}` at rows {first_row} and {second_row}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_manifest(m: &Manifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, entry) in m.entries.iter().enumerate() {
        if let Err((column, message)) = entry.check() {
            report.violations.push(Violation::Entry {
                row: i + 1,
                sample_id: entry.sample_id.clone(),
                column: column.into(),
                message,
            });
        }
        if let Some(&first) = seen.get(entry.sample_id.as_str()) {
            report.violations.push(Violation::DuplicateSampleId {
                sample_id: entry.sample_id.clone(),
                first_row: first + 1,
                second_row: i + 1,
            });
        } else {
            seen.insert(entry.sample_id.as_str(), i);
        }
    }
    report
}

/// Warnings for subject ids that occur on both sides of a split. Splits are
/// not required to be subject-disjoint, so these are advisory only.
pub fn subject_overlap_warnings(train: &Manifest, val: &Manifest) -> Vec<String> {
    let subjects = |m: &Manifest| -> BTreeSet<String> {
        m.entries
            .iter()
            .flat_map(|e| e.subjects.iter().cloned())
            .collect()
    };
    let train_subjects = subjects(train);
    subjects(val)
        .intersection(&train_subjects)
        .map(|s| format!("subject `{s}` appears in both train and validation"))
        .collect()
}

// ---------------------------------------------------------------------------
// Summary

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SummaryKey {
    pub source: Source,
    pub label: Label,
    pub variant: Variant,
    pub tool: Tool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSummary {
    pub counts: BTreeMap<SummaryKey, usize>,
    pub bonafide_total: usize,
    pub morph_total: usize,
}

impl DatasetSummary {
    pub fn total(&self) -> usize {
        self.bonafide_total + self.morph_total
    }

    pub fn label_total(&self, label: Label) -> usize {
        match label {
            Label::Bonafide => self.bonafide_total,
            Label::Morph => self.morph_total,
        }
    }

    pub fn count(&self, key: &SummaryKey) -> usize {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Sum of counts over all keys matching the given partial selection.
    pub fn count_where(
        &self,
        source: Option<Source>,
        label: Option<Label>,
        variant: Option<Variant>,
        tool: Option<Tool>,
    ) -> usize {
        self.counts
            .iter()
            .filter(|(k, _)| {
                source.is_none_or(|s| k.source == s)
                    && label.is_none_or(|l| k.label == l)
                    && variant.is_none_or(|v| k.variant == v)
                    && tool.is_none_or(|t| k.tool == t)
            })
            .map(|(_, c)| c)
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .counts
            .iter()
            .map(|(k, c)| {
                serde_json::json!({
                    "source": k.source,
                    "label": k.label,
                    "variant": k.variant,
                    "tool": k.tool,
                    "count": c,
                })
            })
            .collect();
        serde_json::json!({
            "counts": rows,
            "bonafide_total": self.bonafide_total,
            "morph_total": self.morph_total,
            "total": self.total(),
        })
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:<9} {:<10} {:<12} {:>8}",
            "source", "label", "variant", "tool", "count"
        )?;
        for (k, c) in &self.counts {
            writeln!(
                f,
                "{:<8} {:<9} {:<10} {:<12} {:>8}",
                k.source, k.label, k.variant, k.tool, c
            )?;
        }
        writeln!(f, "bona fide total: {}", self.bonafide_total)?;
        writeln!(f, "morph total:     {}", self.morph_total)?;
        write!(f, "total:           {}", self.total())
    }
}

pub fn summarize(m: &Manifest) -> DatasetSummary {
    let mut summary = DatasetSummary::default();
    for e in &m.entries {
        let key = SummaryKey {
            source: e.source,
            label: e.label,
            variant: e.variant,
            tool: e.tool,
        };
        *summary.counts.entry(key).or_insert(0) += 1;
        match e.label {
            Label::Bonafide => summary.bonafide_total += 1,
            Label::Morph => summary.morph_total += 1,
        }
    }
    summary
}

// ---------------------------------------------------------------------------
// Filter

/// Conjunction of value-set clauses. An absent clause matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<BTreeSet<Source>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<BTreeSet<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<BTreeSet<Variant>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<BTreeSet<Tool>>,
}

impl FilterSpec {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn label(mut self, label: Label) -> Self {
        self.label.get_or_insert_with(BTreeSet::new).insert(label);
        self
    }

    pub fn source(mut self, source: Source) -> Self {
        self.source.get_or_insert_with(BTreeSet::new).insert(source);
        self
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant
            .get_or_insert_with(BTreeSet::new)
            .insert(variant);
        self
    }

    pub fn tool(mut self, tool: Tool) -> Self {
        self.tool.get_or_insert_with(BTreeSet::new).insert(tool);
        self
    }

    pub fn matches(&self, e: &ManifestEntry) -> bool {
        fn ok<T: Ord>(clause: &Option<BTreeSet<T>>, value: &T) -> bool {
            clause.as_ref().is_none_or(|set| set.contains(value))
        }
        ok(&self.source, &e.source)
            && ok(&self.label, &e.label)
            && ok(&self.variant, &e.variant)
            && ok(&self.tool, &e.tool)
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn clause<T: fmt::Display>(name: &str, set: &Option<BTreeSet<T>>) -> Option<String> {
            set.as_ref().map(|s| {
                let values: Vec<String> = s.iter().map(ToString::to_string).collect();
                format!("{name}={}", values.join("|"))
            })
        }
        let parts: Vec<String> = [
            clause("source", &self.source),
            clause("label", &self.label),
            clause("variant", &self.variant),
            clause("tool", &self.tool),
        ]
        .into_iter()
        .flatten()
        .collect();
        if parts.is_empty() {
            f.write_str("*")
        } else {
            f.write_str(&parts.join(" & "))
        }
    }
}

pub fn filter(m: &Manifest, spec: &FilterSpec) -> Manifest {
    let entries = m
        .entries
        .iter()
        .filter(|e| spec.matches(e))
        .cloned()
        .collect();
    m.derived(entries, format!("filter: {spec}"))
}

// ---------------------------------------------------------------------------
// Split and merge

/// Label-stratified train/validation split.
///
/// The validation size is `round(val_fraction * |m|)`, distributed over the
/// label strata by largest remainder so each stratum receives the floor or
/// ceiling of its proportional share. Within a stratum entries are ordered by
/// `sample_id` and shuffled with a ChaCha8 stream seeded from `seed`. Both
/// outputs keep the input row order.
pub fn split_train_val(m: &Manifest, val_fraction: f64, seed: u64) -> Result<(Manifest, Manifest)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must lie strictly between 0 and 1, got {val_fraction}"
        )));
    }
    let mut strata: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, e) in m.entries.iter().enumerate() {
        strata.entry(e.label).or_default().push(i);
    }
    if strata.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot split an empty manifest".into(),
        ));
    }
    if let Some((label, rows)) = strata.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "stratum `{label}` has {} entries; at least 2 are required to split",
            rows.len()
        )));
    }

    let total = round_half_up(val_fraction * m.len() as f64) as usize;
    let quotas: Vec<(Label, f64)> = strata
        .iter()
        .map(|(l, rows)| (*l, val_fraction * rows.len() as f64))
        .collect();
    let mut alloc: BTreeMap<Label, usize> = quotas
        .iter()
        .map(|(l, q)| (*l, q.floor() as usize))
        .collect();
    let assigned: usize = alloc.values().sum();
    let mut by_remainder: Vec<(Label, f64)> =
        quotas.iter().map(|(l, q)| (*l, q - q.floor())).collect();
    by_remainder.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (label, _) in by_remainder.iter().take(total.saturating_sub(assigned)) {
        *alloc.get_mut(label).expect("label present") += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_val = vec![false; m.len()];
    for (label, rows) in &strata {
        let mut rows = rows.clone();
        rows.sort_by(|&a, &b| m.entries[a].sample_id.cmp(&m.entries[b].sample_id));
        rows.shuffle(&mut rng);
        for &row in rows.iter().take(alloc[label]) {
            in_val[row] = true;
        }
    }

    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (entry, &v) in m.entries.iter().zip(&in_val) {
        if v {
            val.push(entry.clone());
        } else {
            train.push(entry.clone());
        }
    }
    let note = |side: &str| {
        format!("split: {side} side of stratified split, val_fraction={val_fraction}, seed={seed}")
    };
    Ok((
        m.derived(train, note("train")),
        m.derived(val, note("validation")),
    ))
}

/// Concatenates `a` then `b`. Sample ids must be disjoint.
pub fn merge(a: &Manifest, b: &Manifest) -> Result<Manifest> {
    let ids: HashSet<&str> = a.sample_ids().collect();
    if let Some(clash) = b.sample_ids().find(|id| ids.contains(id)) {
        return Err(Error::SampleIdCollision(clash.to_string()));
    }
    let mut entries = a.entries.clone();
    entries.extend(b.entries.iter().cloned());
    let mut provenance: Vec<String> = a.provenance.iter().map(|p| format!("[a] {p}")).collect();
    provenance.extend(b.provenance.iter().map(|p| format!("[b] {p}")));
    provenance.push(format!(
        "merge: a ({} entries) + b ({} entries)",
        a.len(),
        b.len()
    ));
    Ok(Manifest {
        entries,
        provenance,
    })
}
