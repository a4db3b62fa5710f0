//! Report files.
//!
//! `report.json` holds raw fractions and round-trips through [`ReportDocument`];
//! `report.csv` and `report.md` scale metrics by 100; `plots/*.csv` hold one mean curve
//! per group with raw values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, CurvePoint, EvalWarning, Evaluation, GroupKey, PreferenceCall};
use crate::metrics::MetricReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const KIND: &str = "frame-eval-report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
    PlotData,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "plot-data" | "plots" => Ok(ReportFormat::PlotData),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub key: GroupKey,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub key: GroupKey,
    pub points: Vec<CurvePoint>,
}

/// Machine-readable form of an evaluation and its preference calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub kind: String,
    pub reports: Vec<ReportEntry>,
    pub preference_calls: Vec<PreferenceCall>,
    #[serde(default)]
    pub curves: Vec<CurveEntry>,
    #[serde(default)]
    pub warnings: Vec<EvalWarning>,
}

impl ReportDocument {
    pub fn new(evaluation: &Evaluation, calls: &[PreferenceCall]) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: KIND.to_string(),
            reports: evaluation
                .reports
                .iter()
                .map(|(key, metrics)| ReportEntry {
                    key: key.clone(),
                    metrics: metrics.clone(),
                })
                .collect(),
            preference_calls: calls.to_vec(),
            curves: evaluation
                .curves
                .iter()
                .map(|(key, points)| CurveEntry {
                    key: key.clone(),
                    points: points.clone(),
                })
                .collect(),
            warnings: evaluation.warnings.clone(),
        }
    }

    pub fn evaluation(&self) -> Evaluation {
        Evaluation {
            reports: self
                .reports
                .iter()
                .map(|e| (e.key.clone(), e.metrics.clone()))
                .collect(),
            curves: self
                .curves
                .iter()
                .map(|e| (e.key.clone(), e.points.clone()))
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, AnalysisError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AnalysisError::ReportFile(format!("{}: {e}", path.display())))?;
        let doc: ReportDocument = serde_json::from_str(&text)
            .map_err(|e| AnalysisError::ReportFile(format!("{}: {e}", path.display())))?;
        if doc.kind != KIND || doc.schema_version != REPORT_SCHEMA_VERSION {
            return Err(AnalysisError::ReportFile(format!(
                "{}: expected {KIND} schema {REPORT_SCHEMA_VERSION}, found {} schema {}",
                path.display(),
                doc.kind,
                doc.schema_version
            )));
        }
        Ok(doc)
    }
}

fn scaled(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", x * 100.0)).unwrap_or_default()
}

const COLUMNS: [&str; 8] = [
    "obj_f1_x100",
    "acc_pct",
    "eps_cos_x100",
    "eps_hemi_x100",
    "sigma_x100",
    "eta_x100",
    "c_sym_x100",
    "c_opp_x100",
];

fn write_csv(doc: &ReportDocument, path: &Path) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec![
        "model",
        "split",
        "perspective",
        "relation",
        "language",
        "reference",
        "n_cases",
    ];
    header.extend(COLUMNS);
    w.write_record(&header).map_err(csv_io)?;
    for e in &doc.reports {
        let k = &e.key;
        let mut row = vec![
            k.model.clone(),
            k.split.to_string(),
            k.perspective.to_string(),
            k.relation.to_string(),
            k.language.clone(),
            k.reference.to_string(),
            e.metrics.n_cases.to_string(),
        ];
        row.extend(e.metrics.fields().iter().map(|(_, v)| scaled(*v)));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> AnalysisError {
    AnalysisError::UnwritableOutput(std::io::Error::other(e.to_string()))
}

fn markdown(doc: &ReportDocument) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    out.push_str(
        "All metrics are scaled by 100 (accuracy in percent). Empty cells could not be computed.\n",
    );
    let mut sections: BTreeMap<(&str, String, &str), Vec<&ReportEntry>> = BTreeMap::new();
    for e in &doc.reports {
        sections
            .entry((&e.key.model, e.key.split.to_string(), &e.key.language))
            .or_default()
            .push(e);
    }
    for ((model, split, language), entries) in sections {
        let _ = write!(out, "\n## {model} / {split} / {language}\n\n");
        out.push_str("| perspective | relation | reference | n | Obj F1 | Acc% | ε^cos | ε^hemi | σ | η | c^sym | c^opp |\n");
        out.push_str("|---|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for e in entries {
            let k = &e.key;
            let _ = write!(
                out,
                "| {} | {} | {} | {} |",
                k.perspective, k.relation, k.reference, e.metrics.n_cases
            );
            for (_, v) in e.metrics.fields() {
                let _ = write!(out, " {} |", scaled(v));
            }
            out.push('\n');
        }
    }
    if !doc.preference_calls.is_empty() {
        out.push_str("\n## Preference calls\n\n");
        out.push_str("Winner is the lowest aggregated ε^cos when it leads the runner-up by at least the threshold; `-` means no significant preference.\n\n");
        out.push_str("| model | split | perspective | language | dimension | scores (ε^cos ×100) | winner | margin ×100 | threshold ×100 |\n");
        out.push_str("|---|---|---|---|---|---|---|---:|---:|\n");
        for c in &doc.preference_calls {
            let scores: Vec<String> = c
                .scores
                .iter()
                .map(|(k, v)| format!("{k} {:.1}", v * 100.0))
                .collect();
            let dim = match c.dimension {
                super::Dimension::Transform => "transform",
                super::Dimension::FrameOfReference => "frame of reference",
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {dim} | {} | {} | {:.1} | {:.1} |",
                c.scope.model,
                c.scope.split,
                c.scope.perspective,
                c.scope.language,
                scores.join(", "),
                c.winner.as_deref().unwrap_or("-"),
                c.margin * 100.0,
                c.threshold * 100.0
            );
        }
    }
    if !doc.warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in &doc.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

fn file_stem(key: &GroupKey) -> String {
    let raw = format!(
        "{}__{}__{}__{}__{}__{}",
        key.model, key.split, key.language, key.perspective, key.relation, key.reference
    );
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `format` into `dir` and returns the files written, in order.
pub fn emit_report(
    doc: &ReportDocument,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    if doc.reports.is_empty() {
        return Err(AnalysisError::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let mut text = serde_json::to_string_pretty(doc)
                .map_err(|e| AnalysisError::ReportFile(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join("report.csv");
            write_csv(doc, &path)?;
            Ok(vec![path])
        }
        ReportFormat::Markdown => {
            let path = dir.join("report.md");
            fs::write(&path, markdown(doc))?;
            Ok(vec![path])
        }
        ReportFormat::PlotData => {
            let plots = dir.join("plots");
            fs::create_dir_all(&plots)?;
            let mut written = Vec::with_capacity(doc.curves.len());
            for curve in &doc.curves {
                let path = plots.join(format!("{}.csv", file_stem(&curve.key)));
                let mut w = csv::Writer::from_path(&path).map_err(csv_io)?;
                w.write_record(["theta", "p", "p_hat", "lambda_hemi", "lambda_cos"])
                    .map_err(csv_io)?;
                for pt in &curve.points {
                    w.write_record(
                        [pt.theta, pt.p, pt.p_hat, pt.lambda_hemi, pt.lambda_cos]
                            .map(|v| v.to_string()),
                    )
                    .map_err(csv_io)?;
                }
                w.flush()?;
                written.push(path);
            }
            Ok(written)
        }
    }
}
