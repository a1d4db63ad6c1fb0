//! Report tables and the full-precision companion records.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Aggregate, EvalError, EvalReport, TestsetType, TiePolicy};
use crate::perturb::ErrorType;

/// How every score in a report was computed, recorded in companion files.
pub const SCORE_DEFINITION: &str =
    "mean log-probability over target tokens plus end-of-sequence, for correct, contrastive and 1-best alike";

const MISSING: &str = "—";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Tsv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(EvalError::UnknownFormat(s.to_string())),
        }
    }
}

/// Rounds half away from zero at one decimal. The nudge keeps values such
/// as 0.05, stored a hair below or above, on the intended side.
fn one_decimal(x: f64) -> String {
    let scaled = x * 10.0;
    let r = (scaled + scaled.signum() * 1e-9).round() / 10.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.1}")
}

fn cell(agg: Option<Aggregate>) -> String {
    match agg {
        Some(a) => format!("{}±{}", one_decimal(a.mean), one_decimal(a.std)),
        None => MISSING.to_string(),
    }
}

/// One row per (error type, test set type), ordered by error type and then
/// human before machine. Columns: discrepancy for every backend group, then
/// accuracy for every backend group, each as `mean±std`.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let groups: BTreeSet<&str> = reports.iter().flat_map(|r| r.groups()).collect();
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.error_type, r.testset_type));

    let mut header = vec!["error_type".to_string(), "testset".to_string()];
    header.extend(groups.iter().map(|g| format!("discrepancy {g}")));
    header.extend(groups.iter().map(|g| format!("accuracy {g}")));

    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.error_type.to_string(), r.testset_type.as_str().to_string()];
            row.extend(groups.iter().map(|g| cell(r.discrepancy(g))));
            row.extend(groups.iter().map(|g| cell(r.accuracy(g))));
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            for row in std::iter::once(&header).chain(&body) {
                writeln!(out, "{}", row.join("\t")).unwrap();
            }
        }
        ReportFormat::Markdown => {
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            let rule: Vec<&str> = header
                .iter()
                .enumerate()
                .map(|(i, _)| if i < 2 { "---" } else { "---:" })
                .collect();
            writeln!(out, "| {} |", rule.join(" | ")).unwrap();
            for row in &body {
                writeln!(out, "| {} |", row.join(" | ")).unwrap();
            }
        }
    }
    Ok(out)
}

/// Full-precision values for one backend on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub error_type: ErrorType,
    pub testset_type: TestsetType,
    pub backend: String,
    pub group: String,
    pub pairs: usize,
    pub accuracy: f64,
    pub discrepancy: Option<f64>,
    pub length_unit: String,
    pub tie_policy: TiePolicy,
    pub score: String,
}

/// Companion records in report row order, then backend name.
pub fn report_records(reports: &[EvalReport]) -> Vec<ReportRecord> {
    let mut out: Vec<ReportRecord> = reports
        .iter()
        .flat_map(|r| {
            r.results.iter().map(move |b| ReportRecord {
                error_type: r.error_type,
                testset_type: r.testset_type,
                backend: b.backend.clone(),
                group: b.group.clone(),
                pairs: b.pairs,
                accuracy: b.accuracy,
                discrepancy: b.discrepancy,
                length_unit: b.length_unit.clone(),
                tie_policy: r.tie_policy,
                score: SCORE_DEFINITION.to_string(),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        (a.error_type, a.testset_type, &a.backend).cmp(&(b.error_type, b.testset_type, &b.backend))
    });
    out
}
