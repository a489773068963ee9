//! Exact set match and execution-based scoring of run records.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::{RunRecord, RunStatus};
use crate::schema::SchemaCatalog;

pub mod em;
pub mod exec;
pub mod report;

pub use em::{exact_set_match, exact_set_match_with, EmOptions, EmVerdict, SEGMENTS, SEGMENT_VERSION};
pub use exec::{execution_match, FixtureSet, TsDetail, TsVerdict, DEFAULT_FLOAT_TOL};
pub use report::{emit_report, ReportFormat};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("fixture {}: {message}", path.display())]
    Fixture { path: PathBuf, message: String },
    #[error("{0}")]
    Alignment(String),
    #[error("gold line {line}: {message}")]
    Gold { line: usize, message: String },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One gold query: `{"id", "db_id", "query"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub id: String,
    pub db_id: String,
    pub query: String,
}

/// Reads JSON Lines gold records; blank lines are skipped.
pub fn load_golds(text: &str) -> Result<Vec<GoldItem>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Gold {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub em: EmOptions,
    pub float_tol: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            em: EmOptions::default(),
            float_tol: DEFAULT_FLOAT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalVerdict {
    pub id: String,
    pub db_id: String,
    pub em: bool,
    pub ts: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_diff: Option<Vec<String>>,
    pub ts_detail: TsDetail,
    pub attempts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub segment_version: String,
    pub segments: Vec<String>,
    pub ignore_literals: bool,
    pub float_tol: f64,
}

impl ReportMeta {
    pub fn new(opts: &EvalOptions) -> Self {
        ReportMeta {
            segment_version: SEGMENT_VERSION.to_string(),
            segments: SEGMENTS.iter().map(|s| s.to_string()).collect(),
            ignore_literals: opts.em.ignore_literals,
            float_tol: opts.float_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    /// Items scored, i.e. all items except gold errors.
    pub n: usize,
    pub em_accuracy: f64,
    pub ts_accuracy: f64,
    /// Runs that ended without a final query.
    pub exhausted: usize,
    pub gold_errors: usize,
    pub per_item: Vec<EvalVerdict>,
    pub attempt_histogram: BTreeMap<u32, usize>,
}

impl EvalReport {
    /// Aggregates verdicts; gold errors stay listed but leave the denominators.
    pub fn from_verdicts(meta: ReportMeta, per_item: Vec<EvalVerdict>, exhausted: usize) -> Self {
        let scored: Vec<&EvalVerdict> = per_item.iter().filter(|v| v.ts_detail != TsDetail::GoldError).collect();
        let n = scored.len();
        let ratio = |hits: usize| if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let em_accuracy = ratio(scored.iter().filter(|v| v.em).count());
        let ts_accuracy = ratio(scored.iter().filter(|v| v.ts).count());
        let mut attempt_histogram = BTreeMap::new();
        for v in &per_item {
            *attempt_histogram.entry(v.attempts as u32).or_default() += 1;
        }
        EvalReport {
            meta,
            n,
            em_accuracy,
            ts_accuracy,
            exhausted,
            gold_errors: per_item.len() - n,
            per_item,
            attempt_histogram,
        }
    }
}

/// Scores one prediction against its gold.
pub fn evaluate_item(
    id: &str,
    pred: Option<&str>,
    gold: &GoldItem,
    fixtures: &FixtureSet,
    catalog: Option<&SchemaCatalog>,
    opts: &EvalOptions,
) -> Result<EvalVerdict, EvalError> {
    let conn = exec::open_fixture(&fixtures.path(&gold.db_id))?;
    let schema = catalog.and_then(|c| c.get(&gold.db_id)).map(|s| s.as_ref());
    let mut v = EvalVerdict {
        id: id.to_string(),
        db_id: gold.db_id.clone(),
        em: false,
        ts: false,
        em_diff: None,
        ts_detail: TsDetail::PredictionError,
        attempts: 0,
        message: None,
    };
    match pred {
        Some(sql) => {
            let e = exact_set_match_with(sql, &gold.query, &opts.em, schema);
            v.em = e.em;
            v.em_diff = (!e.em).then_some(e.diff);
            let t = exec::execution_match_on(&conn, sql, &gold.query, opts.float_tol);
            v.ts = t.ts;
            v.ts_detail = t.detail;
            v.message = t.message;
        }
        None => {
            // Still run the gold so fixture defects are reported as such.
            match exec::run_query(&conn, &gold.query) {
                Ok(_) => v.message = Some("no final SQL".into()),
                Err(e) => {
                    v.ts_detail = TsDetail::GoldError;
                    v.message = Some(e.to_string());
                }
            }
        }
    }
    Ok(v)
}

fn check_alignment(records: &[RunRecord], golds: &[GoldItem]) -> Result<(), EvalError> {
    for (i, (r, g)) in records.iter().zip(golds).enumerate() {
        if r.id != g.id {
            return Err(EvalError::Alignment(format!(
                "item {}: record id '{}' does not match gold id '{}'",
                i + 1,
                r.id,
                g.id
            )));
        }
    }
    if records.len() != golds.len() {
        let (side, id) = if records.len() > golds.len() {
            ("gold", &records[golds.len()].id)
        } else {
            ("record", &golds[records.len()].id)
        };
        return Err(EvalError::Alignment(format!(
            "{} records vs {} golds: no {side} for id '{id}'",
            records.len(),
            golds.len()
        )));
    }
    Ok(())
}

/// Scores run records against golds aligned by position and id.
pub fn evaluate_run(
    records: &[RunRecord],
    golds: &[GoldItem],
    fixtures: &FixtureSet,
    catalog: Option<&SchemaCatalog>,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    check_alignment(records, golds)?;
    let per_item = records
        .par_iter()
        .zip(golds.par_iter())
        .map(|(r, g)| {
            let mut v = evaluate_item(&r.id, r.final_sql.as_deref(), g, fixtures, catalog, opts)?;
            v.attempts = r.attempts.len();
            Ok(v)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let exhausted = records.iter().filter(|r| r.status != RunStatus::Accepted).count();
    Ok(EvalReport::from_verdicts(ReportMeta::new(opts), per_item, exhausted))
}

/// Scores every gold against itself. A sound fixture suite scores 1.0 on both.
pub fn self_check(
    golds: &[GoldItem],
    fixtures: &FixtureSet,
    catalog: Option<&SchemaCatalog>,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let per_item = golds
        .par_iter()
        .map(|g| evaluate_item(&g.id, Some(&g.query), g, fixtures, catalog, opts))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvalReport::from_verdicts(ReportMeta::new(opts), per_item, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(em: bool, ts: bool, detail: TsDetail) -> EvalVerdict {
        EvalVerdict {
            id: "x".into(),
            db_id: "d".into(),
            em,
            ts,
            em_diff: None,
            ts_detail: detail,
            attempts: 1,
            message: None,
        }
    }

    #[test]
    fn accuracy_arithmetic() {
        let meta = ReportMeta::new(&EvalOptions::default());
        let items = vec![
            verdict(true, true, TsDetail::Match),
            verdict(true, true, TsDetail::Match),
            verdict(true, true, TsDetail::Match),
            verdict(false, true, TsDetail::Match),
        ];
        let r = EvalReport::from_verdicts(meta.clone(), items, 0);
        assert_eq!((r.em_accuracy, r.ts_accuracy), (0.75, 1.0));

        let mut items: Vec<_> = (0..4).map(|_| verdict(true, true, TsDetail::Match)).collect();
        items.push(verdict(false, false, TsDetail::GoldError));
        let r = EvalReport::from_verdicts(meta.clone(), items, 0);
        assert_eq!((r.n, r.gold_errors, r.em_accuracy), (4, 1, 1.0));

        let r = EvalReport::from_verdicts(meta, Vec::new(), 0);
        assert_eq!((r.n, r.em_accuracy, r.ts_accuracy), (0, 0.0, 0.0));
    }

    #[test]
    fn golds_parse() {
        let g = load_golds("{\"id\":\"a\",\"db_id\":\"geo\",\"query\":\"SELECT 1\"}\n\n").unwrap();
        assert_eq!(g.len(), 1);
        let err = load_golds("{\"id\":1}").unwrap_err();
        assert!(err.to_string().starts_with("gold line 1"));
    }
}
