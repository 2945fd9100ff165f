use std::fmt::Write;

use super::{RuntimeError, TraceRecord};
use crate::platoon::SystemState;

pub const REPORT_SCHEMA: &str = "safebn.report/1";

pub const REPORT_COLUMNS: [&str; 12] = [
    "No",
    "SafeML_Status",
    "MLDecision",
    "TrueClass",
    "SpeedLimit",
    "Speed",
    "S0",
    "S1",
    "S2",
    "S3",
    "S4",
    "S5",
];

/// Human-readable table plus a CSV rendering of the same rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    /// Markdown table; the most probable state of each row is bold.
    pub table: String,
    /// CSV with the table columns plus `Argmax` and `Action`.
    pub csv: String,
}

struct Row {
    cells: Vec<String>,
    probs: Vec<String>,
    argmax: SystemState,
    action: &'static str,
}

fn rows(traces: &[TraceRecord]) -> Vec<Row> {
    traces
        .iter()
        .enumerate()
        .map(|(i, t)| Row {
            cells: vec![
                (i + 1).to_string(),
                if t.safeml_ood() { "1" } else { "0" }.to_string(),
                t.predicted_class.to_string(),
                t.true_class.map_or("-".to_string(), |c| c.to_string()),
                if t.speed_limit == "NoLimit" {
                    "-".to_string()
                } else {
                    t.speed_limit.clone()
                },
                t.context.speed.to_string(),
            ],
            probs: t.posterior.iter().map(|p| format!("{p:.4}")).collect(),
            argmax: t.state,
            action: t.action.as_str(),
        })
        .collect()
}

pub fn emit_report(traces: &[TraceRecord]) -> Report {
    let rows = rows(traces);

    let mut table = format!("<!-- {REPORT_SCHEMA} -->\n");
    let _ = writeln!(table, "| {} |", REPORT_COLUMNS.join(" | "));
    let _ = writeln!(table, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
    for row in &rows {
        let probs = row.probs.iter().enumerate().map(|(k, p)| {
            if k == row.argmax.index() {
                format!("**{p}**")
            } else {
                p.clone()
            }
        });
        let cells: Vec<String> = row.cells.iter().cloned().chain(probs).collect();
        let _ = writeln!(table, "| {} |", cells.join(" | "));
    }

    let mut csv = format!("{},Argmax,Action\n", REPORT_COLUMNS.join(","));
    for row in &rows {
        let cells: Vec<&str> = row
            .cells
            .iter()
            .chain(&row.probs)
            .map(String::as_str)
            .chain([row.argmax.label(), row.action])
            .collect();
        let _ = writeln!(csv, "{}", cells.join(","));
    }
    Report { table, csv }
}

/// One JSON object per line.
pub fn write_trace_jsonl(traces: &[TraceRecord]) -> Result<String, RuntimeError> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_trace_jsonl(text: &str) -> Result<Vec<TraceRecord>, RuntimeError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(RuntimeError::from))
        .collect()
}
