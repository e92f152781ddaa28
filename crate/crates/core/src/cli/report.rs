//! Report tables and their serialization.
//!
//! The CSV report has the fixed columns `n, statistic, estimate, se, oracle,
//! z`; `oracle` and `z` are empty for statistics without an exact oracle.
//! The JSON summary repeats every row with a `pass` flag (`|z| < 3`, or
//! `null` without an oracle) and lists the named criteria of the experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Format;
use crate::error::{Error, Result};

/// Verdict threshold on z-scores.
pub const Z_PASS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub statistic: String,
    pub estimate: f64,
    pub se: f64,
    pub oracle: Option<f64>,
    pub z: Option<f64>,
}

impl ReportRow {
    pub fn plain(n: usize, statistic: impl Into<String>, estimate: f64, se: f64) -> Self {
        ReportRow {
            n,
            statistic: statistic.into(),
            estimate,
            se,
            oracle: None,
            z: None,
        }
    }

    pub fn with_oracle(
        n: usize,
        statistic: impl Into<String>,
        estimate: f64,
        se: f64,
        oracle: f64,
    ) -> Self {
        ReportRow {
            oracle: Some(oracle),
            z: Some(crate::stats::z_score(estimate, se, oracle)),
            ..Self::plain(n, statistic, estimate, se)
        }
    }

    /// `None` when the row has no oracle.
    pub fn pass(&self) -> Option<bool> {
        self.z.map(|z| z.abs() < Z_PASS)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    /// Informational checks are reported but do not affect the verdict.
    pub required: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Criterion {
            name: name.into(),
            pass,
            required: true,
            detail: detail.into(),
        }
    }

    pub fn info(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Criterion {
            required: false,
            ..Self::new(name, pass, detail)
        }
    }
}

/// Everything an experiment produced, before serialization.
#[derive(Clone, Debug, Default)]
pub struct Results {
    pub rows: Vec<ReportRow>,
    pub criteria: Vec<Criterion>,
    /// One JSON document per replica, written as JSONL.
    pub traces: Vec<String>,
    /// Extra plot-ready tables: `(file name, CSV text)`.
    pub tables: Vec<(String, String)>,
}

impl Results {
    /// Every z-scored row and every required criterion passes.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass() != Some(false))
            && self.criteria.iter().all(|c| c.pass || !c.required)
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    #[serde(flatten)]
    row: &'a ReportRow,
    pass: Option<bool>,
}

#[derive(Serialize)]
struct Summary<'a> {
    all_pass: bool,
    criteria: &'a [Criterion],
    rows: Vec<SummaryRow<'a>>,
}

pub fn csv_text(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Input(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Input(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(format!("csv: {e}")))
}

pub fn summary_json(results: &Results) -> Result<String> {
    let summary = Summary {
        all_pass: results.all_pass(),
        criteria: &results.criteria,
        rows: results
            .rows
            .iter()
            .map(|row| SummaryRow {
                row,
                pass: row.pass(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(format!("json: {e}")))
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| io_context(&p, e))?;
    Ok(p)
}

/// Write `report.csv` (or `report.json`), `summary.json`, `traces.jsonl`
/// when traces exist, and any extra tables into `dir`.
pub fn emit_report(results: &Results, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    if results.rows.is_empty() {
        return Err(Error::Input("no report rows to emit".into()));
    }
    fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    let mut files = Vec::new();
    files.push(match format {
        Format::Csv => write(dir, "report.csv", &csv_text(&results.rows)?)?,
        Format::Json => write(
            dir,
            "report.json",
            &serde_json::to_string_pretty(&results.rows)
                .map_err(|e| Error::Input(format!("json: {e}")))?,
        )?,
    });
    files.push(write(dir, "summary.json", &summary_json(results)?)?);
    if !results.traces.is_empty() {
        let mut t = results.traces.join("\n");
        t.push('\n');
        files.push(write(dir, "traces.jsonl", &t)?);
    }
    for (name, text) in &results.tables {
        files.push(write(dir, name, text)?);
    }
    Ok(files)
}
