//! Result tables, DET data files and DET plots.
//!
//! All output is a pure function of its input: no timestamps, fixed float
//! formatting, LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{det_points, probit, ErrorTradeoff};
use crate::sampling::{ScenarioKind, ScenarioSpec};

pub const DET_CSV_HEADER: &str = "threshold,macer,bpcer,x_probit,y_probit";

pub const TABLE_CSV_HEADER: &str = "round,model,additional_data,sample_size,total_bonafide,\
deer_pct,bpcer5_pct,bpcer10_pct,bpcer20_pct,best,deer,bpcer5,bpcer10,bpcer20";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    TrainFeretTestFrgc,
    TrainFrgcTestFeret,
    Custom,
}

impl RoundKind {
    pub fn from_name(name: &str) -> Self {
        match name {
            "train_feret_test_frgc" => RoundKind::TrainFeretTestFrgc,
            "train_frgc_test_feret" => RoundKind::TrainFrgcTestFeret,
            _ => RoundKind::Custom,
        }
    }
}

/// Outcome of one (round, scenario, model) run; one row of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub round: String,
    pub round_kind: RoundKind,
    pub model: String,
    pub scenario: ScenarioSpec,
    pub sample_size: usize,
    pub total_bonafide: usize,
    pub deer: f64,
    pub deer_bracket: (f64, f64),
    pub bpcer5: f64,
    pub bpcer10: f64,
    pub bpcer20: f64,
    /// DET CSV path, relative to the output directory.
    pub tradeoff_ref: String,
}

impl RunResult {
    fn sample_size_cell(&self) -> String {
        match self.scenario.kind {
            ScenarioKind::Inject { .. } => self.sample_size.to_string(),
            _ => "-".into(),
        }
    }
}

/// Rate in percent, rounded half up to two decimals.
pub fn percent(rate: f64) -> String {
    format!("{:.2}", (rate * 10_000.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportDocument {
    pub csv: String,
    pub text: String,
}

/// Indices of the lowest-D-EER row within each round (first row wins ties).
fn best_rows(results: &[RunResult]) -> Vec<bool> {
    let mut best = vec![false; results.len()];
    let mut rounds: Vec<&str> = Vec::new();
    for r in results {
        if !rounds.contains(&r.round.as_str()) {
            rounds.push(&r.round);
        }
    }
    for round in rounds {
        let winner = results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.round == round)
            .min_by(|(ia, a), (ib, b)| a.deer.total_cmp(&b.deer).then(ia.cmp(ib)))
            .map(|(i, _)| i);
        if let Some(i) = winner {
            best[i] = true;
        }
    }
    best
}

pub fn render_table(results: &[RunResult]) -> Result<ReportDocument> {
    if results.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot render a table without results".into(),
        ));
    }
    let best = best_rows(results);

    let mut csv = String::from(TABLE_CSV_HEADER);
    csv.push('\n');
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for (r, &b) in results.iter().zip(&best) {
        writer
            .write_record([
                r.round.clone(),
                r.model.clone(),
                r.scenario.additional_data(),
                r.sample_size_cell(),
                r.total_bonafide.to_string(),
                percent(r.deer),
                percent(r.bpcer5),
                percent(r.bpcer10),
                percent(r.bpcer20),
                b.to_string(),
                r.deer.to_string(),
                r.bpcer5.to_string(),
                r.bpcer10.to_string(),
                r.bpcer20.to_string(),
            ])
            .expect("writing to Vec cannot fail");
    }
    csv.push_str(
        std::str::from_utf8(&writer.into_inner().expect("flushing Vec cannot fail"))
            .expect("csv output is UTF-8"),
    );

    let headers = [
        "Model",
        "Additional data (%)",
        "Size of the sample",
        "Total bona fide",
        "D-EER",
        "BPCER5",
        "BPCER10",
        "BPCER20",
    ];
    let rows: Vec<[String; 8]> = results
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.scenario.additional_data(),
                r.sample_size_cell(),
                r.total_bonafide.to_string(),
                percent(r.deer),
                percent(r.bpcer5),
                percent(r.bpcer10),
                percent(r.bpcer20),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String], marker: &str| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            // Text columns left-aligned, numbers right-aligned.
            if i < 2 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "{cell:>w$}");
            }
        }
        s.push_str(marker);
        s.trim_end().to_string()
    };

    let mut text = String::new();
    let mut current: Option<&str> = None;
    for ((r, row), &b) in results.iter().zip(&rows).zip(&best) {
        if current != Some(r.round.as_str()) {
            if current.is_some() {
                text.push('\n');
            }
            current = Some(&r.round);
            let _ = writeln!(text, "Round: {}", r.round);
            let head: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
            let head_line = line(&head, "");
            let _ = writeln!(text, "{head_line}");
            let _ = writeln!(text, "{}", "-".repeat(head_line.len()));
        }
        let _ = writeln!(text, "{}", line(row, if b { "  *" } else { "" }));
    }
    text.push_str("\n* lowest D-EER in round. Metrics in percent.\n");
    Ok(ReportDocument { csv, text })
}

// ---------------------------------------------------------------------------
// DET CSV

pub fn det_csv_string(e: &ErrorTradeoff) -> String {
    let mut out = String::from(DET_CSV_HEADER);
    out.push('\n');
    for (i, (x, y)) in e.interior().zip(det_points(e)) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.thresholds[i], e.macer[i], e.bpcer[i], x, y
        );
    }
    out
}

pub fn det_csv(e: &ErrorTradeoff, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, det_csv_string(e)).map_err(|err| Error::io(path, err))
}

pub fn parse_det_csv(text: &str) -> Result<ErrorTradeoff> {
    let mut lines = text.lines();
    if lines.next() != Some(DET_CSV_HEADER) {
        return Err(Error::Schema {
            line: 1,
            column: "header".into(),
            message: format!("expected `{DET_CSV_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |column: &str| Error::Schema {
            line: i + 2,
            column: column.into(),
            message: format!("cannot parse `{line}`"),
        };
        if fields.len() != 5 {
            return Err(bad("-"));
        }
        let num = |j: usize, column: &str| fields[j].parse::<f64>().map_err(|_| bad(column));
        rows.push((num(0, "threshold")?, num(1, "macer")?, num(2, "bpcer")?));
    }
    ErrorTradeoff::from_interior(rows)
}

pub fn read_det_csv(path: impl AsRef<Path>) -> Result<ErrorTradeoff> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_det_csv(&text)
}

// ---------------------------------------------------------------------------
// DET SVG

pub const SVG_SIZE: f64 = 800.0;
/// Tick positions in percent on both axes.
pub const DET_TICKS_PCT: [f64; 8] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0];
const PLOT_LEFT: f64 = 70.0;
const PLOT_TOP: f64 = 80.0;
const PLOT_SIDE: f64 = 560.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Plotted range in normal-deviate units, shared by both axes.
pub fn det_axis_range() -> (f64, f64) {
    (
        probit(0.0005).expect("in range"),
        probit(0.6).expect("in range"),
    )
}

/// Maps a normal deviate to SVG coordinates `(x, y)` for the given axis.
pub fn det_to_svg(x: f64, y: f64) -> (f64, f64) {
    let (lo, hi) = det_axis_range();
    let scale = PLOT_SIDE / (hi - lo);
    (
        PLOT_LEFT + (x - lo) * scale,
        PLOT_TOP + PLOT_SIDE - (y - lo) * scale,
    )
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn tick_label(pct: f64) -> String {
    if pct.fract() == 0.0 {
        format!("{}", pct as u64)
    } else {
        format!("{pct}")
    }
}

/// Renders DET curves on normal-deviate axes: MACER on x, BPCER on y.
pub fn render_det_svg(title: &str, curves: &[(String, ErrorTradeoff)]) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument(
            "a DET plot needs at least one curve".into(),
        ));
    }
    let (lo, hi) = det_axis_range();
    let (x0, y1) = det_to_svg(lo, lo);
    let (x1, y0) = det_to_svg(hi, hi);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        s,
        r##"<defs><clipPath id="plot-area"><rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"##,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="45" text-anchor="middle" font-size="16">{}</text>"##,
        (x0 + x1) / 2.0,
        xml_escape(title)
    );

    // Grid and ticks.
    let _ = writeln!(s, r##"<g class="grid" stroke="#dddddd" stroke-width="1">"##);
    for pct in DET_TICKS_PCT {
        let z = probit(pct / 100.0).expect("tick in range");
        let (gx, gy) = det_to_svg(z, z);
        let _ = writeln!(
            s,
            r##"<line x1="{gx:.2}" y1="{y0:.2}" x2="{gx:.2}" y2="{y1:.2}"/>"##
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{gy:.2}" x2="{x1:.2}" y2="{gy:.2}"/>"##
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g class="ticks" fill="#000000">"##);
    for pct in DET_TICKS_PCT {
        let z = probit(pct / 100.0).expect("tick in range");
        let (gx, gy) = det_to_svg(z, z);
        let label = tick_label(pct);
        let _ = writeln!(
            s,
            r##"<text x="{gx:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            y1 + 18.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            x0 - 8.0,
            gy + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000" stroke-width="1"/>"##,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">MACER (%)</text>"##,
        (x0 + x1) / 2.0,
        y1 + 42.0
    );
    let yc = (y0 + y1) / 2.0;
    let _ = writeln!(
        s,
        r##"<text x="20" y="{yc:.2}" text-anchor="middle" transform="rotate(-90 20 {yc:.2})">BPCER (%)</text>"##
    );

    let _ = writeln!(
        s,
        r##"<line class="diagonal" x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="#999999" stroke-width="1" stroke-dasharray="4 4"/>"##
    );

    let _ = writeln!(
        s,
        r##"<g class="curves" clip-path="url(#plot-area)" fill="none" stroke-width="2">"##
    );
    for (i, (_, curve)) in curves.iter().enumerate() {
        let points: Vec<String> = det_points(curve)
            .into_iter()
            .map(|(x, y)| {
                let (px, py) = det_to_svg(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline stroke="{}" points="{}"/>"##,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");

    let legend_x = x1 + 16.0;
    let _ = writeln!(s, r##"<g class="legend">"##);
    for (i, (label, _)) in curves.iter().enumerate() {
        let ly = y0 + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{legend_x:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"##,
            legend_x + 20.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}">{}</text>"##,
            legend_x + 26.0,
            ly + 4.0,
            xml_escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn det_svg(curves: &[(String, ErrorTradeoff)], path: impl AsRef<Path>) -> Result<()> {
    det_svg_titled("DET curves", curves, path)
}

pub fn det_svg_titled(
    title: &str,
    curves: &[(String, ErrorTradeoff)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = render_det_svg(title, curves)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
