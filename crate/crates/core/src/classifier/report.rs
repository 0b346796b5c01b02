use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::EvalReport;
use super::ClassifierError;

pub const REPORT_COLUMNS: [&str; 7] = ["Model", "Category", "Precision", "Recall", "F1 Score", "Support", "Accuracy"];

/// One table row. Accuracy is only set on the aggregate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "Model")]
    pub model: String,
    #[serde(rename = "Category")]
    pub category: String,
    #[serde(rename = "Precision")]
    pub precision: f64,
    #[serde(rename = "Recall")]
    pub recall: f64,
    #[serde(rename = "F1 Score")]
    pub f1: f64,
    #[serde(rename = "Support")]
    pub support: u64,
    #[serde(rename = "Accuracy")]
    pub accuracy: Option<f64>,
}

fn rows_for(report: &EvalReport) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = report
        .classes
        .iter()
        .map(|c| ReportRow {
            model: report.model.clone(),
            category: c.label.report_name().to_string(),
            precision: c.precision,
            recall: c.recall,
            f1: c.f1,
            support: c.support,
            accuracy: None,
        })
        .collect();
    rows.push(ReportRow {
        model: report.model.clone(),
        category: report.averaging.row_label().to_string(),
        precision: report.aggregate.precision,
        recall: report.aggregate.recall,
        f1: report.aggregate.f1,
        support: report.total,
        accuracy: Some(report.accuracy),
    });
    rows
}

/// Markdown with one table per report, metrics to two decimals.
pub fn render_markdown(reports: &[EvalReport]) -> Result<String, ClassifierError> {
    if reports.is_empty() {
        return Err(ClassifierError::EmptyReport);
    }
    let mut out = String::new();
    for (i, report) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {} ({})\n", report.model, report.mode);
        let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
        for r in rows_for(report) {
            let acc = r.accuracy.map(|a| format!("{a:.2}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {} | {} |",
                r.model, r.category, r.precision, r.recall, r.f1, r.support, acc
            );
        }
    }
    Ok(out)
}

/// CSV with the same rows and columns as the markdown, at full precision.
pub fn render_csv(reports: &[EvalReport]) -> Result<String, ClassifierError> {
    if reports.is_empty() {
        return Err(ClassifierError::EmptyReport);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in reports.iter().flat_map(rows_for) {
        w.serialize(row).map_err(|e| ClassifierError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ClassifierError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ClassifierError::Format(e.to_string()))
}

/// Both renderings at once: `(markdown, csv)`.
pub fn emit_report(reports: &[EvalReport]) -> Result<(String, String), ClassifierError> {
    Ok((render_markdown(reports)?, render_csv(reports)?))
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, ClassifierError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| ClassifierError::Format(e.to_string()))
}
