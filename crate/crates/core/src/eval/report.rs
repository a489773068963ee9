use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, EvalVerdict};

pub const CSV_HEADER: [&str; 5] = ["id", "em", "ts", "attempts", "detail"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "text" => Ok(ReportFormat::Table),
            other => Err(EvalError::Report(format!("unknown report format '{other}'"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Table => "txt",
        }
    }
}

/// `ts_detail`, followed by the EM diff when EM failed.
fn detail(v: &EvalVerdict) -> String {
    match &v.em_diff {
        Some(d) if !d.is_empty() => format!("{} em:{}", v.ts_detail.as_str(), d.join("|")),
        _ => v.ts_detail.as_str().to_string(),
    }
}

fn percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// The one-line headline, e.g. `EM 60.7% / TS 64.5%`.
pub fn headline(r: &EvalReport) -> String {
    format!("EM {} / TS {}", percent(r.em_accuracy), percent(r.ts_accuracy))
}

fn to_csv(r: &EvalReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| EvalError::Report(e.to_string());
    w.write_record(CSV_HEADER).map_err(err)?;
    for v in &r.per_item {
        w.write_record([
            v.id.as_str(),
            if v.em { "1" } else { "0" },
            if v.ts { "1" } else { "0" },
            &v.attempts.to_string(),
            &detail(v),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Report(e.to_string()))
}

fn to_table(r: &EvalReport) -> String {
    let id_w = r.per_item.iter().map(|v| v.id.len()).max().unwrap_or(0).max(2);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<id_w$}  {:<3}  {:<3}  {:>8}  detail",
        "id", "em", "ts", "attempts"
    );
    for v in &r.per_item {
        let mark = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(
            out,
            "{:<id_w$}  {:<3}  {:<3}  {:>8}  {}",
            v.id,
            mark(v.em),
            mark(v.ts),
            v.attempts,
            detail(v)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "scored {}  gold errors {}  without final query {}",
        r.n, r.gold_errors, r.exhausted
    );
    let hist: Vec<String> = r.attempt_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let _ = writeln!(out, "attempts {}", hist.join(" "));
    let _ = writeln!(out, "segments {}", r.meta.segment_version);
    let _ = writeln!(out, "{}", headline(r));
    out
}

/// Serializes a report. Output is deterministic for a given report.
pub fn emit_report(r: &EvalReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).map_err(|e| EvalError::Report(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => to_csv(r),
        ReportFormat::Table => Ok(to_table(r)),
    }
}

pub fn parse_json_report(text: &str) -> Result<EvalReport, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))
}
