//! Execution-based comparison on SQLite fixtures.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::sql::{parse_sql, QueryAst};

pub const DEFAULT_FLOAT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsDetail {
    Match,
    ResultMismatch,
    PredictionError,
    /// The gold query itself failed; the item is left out of accuracies.
    GoldError,
}

impl TsDetail {
    pub fn as_str(self) -> &'static str {
        match self {
            TsDetail::Match => "match",
            TsDetail::ResultMismatch => "result_mismatch",
            TsDetail::PredictionError => "prediction_error",
            TsDetail::GoldError => "gold_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsVerdict {
    pub ts: bool,
    pub detail: TsDetail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TsVerdict {
    fn new(detail: TsDetail, message: Option<String>) -> Self {
        TsVerdict {
            ts: detail == TsDetail::Match,
            detail,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn from_ref(v: ValueRef<'_>) -> Cell {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Int(i),
            ValueRef::Real(f) => Cell::Real(f),
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
        }
    }

    fn number(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Real(f) => Some(*f),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Int(_) | Cell::Real(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    /// Total order used to line up rows before the tolerant comparison.
    fn order(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            _ => match (self.number(), other.number()) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                _ => self.rank().cmp(&other.rank()),
            },
        }
    }

    pub fn matches(&self, other: &Cell, tol: f64) -> bool {
        match (self, other) {
            (Cell::Null, Cell::Null) => true,
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Blob(a), Cell::Blob(b)) => a == b,
            _ => match (self.number(), other.number()) {
                (Some(a), Some(b)) => a == b || (a - b).abs() <= tol * a.abs().max(b.abs()),
                _ => false,
            },
        }
    }
}

pub type Row = Vec<Cell>;

fn row_order(a: &Row, b: &Row) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.order(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn rows_match(a: &Row, b: &Row, tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.matches(y, tol))
}

/// Sequence comparison, row by row.
pub fn same_sequence(a: &[Row], b: &[Row], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| rows_match(x, y, tol))
}

/// Multiset comparison. Sorted rows are compared first; when tolerance
/// makes the sort orders disagree, a greedy pairing decides.
pub fn same_multiset(a: &[Row], b: &[Row], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(row_order);
    sb.sort_by(row_order);
    if same_sequence(&sa, &sb, tol) {
        return true;
    }
    let mut used = vec![false; sb.len()];
    sa.iter().all(|ra| {
        let hit = sb
            .iter()
            .enumerate()
            .position(|(j, rb)| !used[j] && rows_match(ra, rb, tol));
        hit.map(|j| used[j] = true).is_some()
    })
}

/// Opens a fixture database read-only.
pub fn open_fixture(path: &Path) -> Result<Connection, EvalError> {
    if !path.is_file() {
        return Err(EvalError::Fixture {
            path: path.to_path_buf(),
            message: "no such file".into(),
        });
    }
    Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX).map_err(|e| {
        EvalError::Fixture {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })
}

/// Runs `sql` and collects every row.
pub fn run_query(conn: &Connection, sql: &str) -> Result<Vec<Row>, rusqlite::Error> {
    let mut stmt = conn.prepare(sql.trim().trim_end_matches(';'))?;
    if !stmt.readonly() {
        return Err(rusqlite::Error::InvalidQuery);
    }
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(r) = rows.next()? {
        let mut row = Vec::with_capacity(width);
        for i in 0..width {
            row.push(Cell::from_ref(r.get_ref(i)?));
        }
        out.push(row);
    }
    Ok(out)
}

/// Whether the outermost query (or the last operand of a set operation)
/// orders its rows.
fn is_ordered(ast: &QueryAst) -> bool {
    match &ast.set_op {
        Some(op) => !ast.order_by.is_empty() || is_ordered(&op.right),
        None => !ast.order_by.is_empty(),
    }
}

/// Executes prediction and gold on one connection and compares results.
/// Gold with a top-level ORDER BY compares as a sequence, otherwise as a
/// multiset.
pub fn execution_match_on(conn: &Connection, pred: &str, gold: &str, tol: f64) -> TsVerdict {
    let gold_rows = match run_query(conn, gold) {
        Ok(r) => r,
        Err(e) => return TsVerdict::new(TsDetail::GoldError, Some(e.to_string())),
    };
    let pred_rows = match run_query(conn, pred) {
        Ok(r) => r,
        Err(e) => return TsVerdict::new(TsDetail::PredictionError, Some(e.to_string())),
    };
    let ordered = parse_sql(gold).map(|a| is_ordered(&a)).unwrap_or(false);
    let same = if ordered {
        same_sequence(&pred_rows, &gold_rows, tol)
    } else {
        same_multiset(&pred_rows, &gold_rows, tol)
    };
    if same {
        TsVerdict::new(TsDetail::Match, None)
    } else {
        TsVerdict::new(
            TsDetail::ResultMismatch,
            Some(format!(
                "{} predicted rows vs {} gold rows",
                pred_rows.len(),
                gold_rows.len()
            )),
        )
    }
}

pub fn execution_match(pred: &str, gold: &str, db: &Path, tol: f64) -> Result<TsVerdict, EvalError> {
    let conn = open_fixture(db)?;
    Ok(execution_match_on(&conn, pred, gold, tol))
}

/// Directory holding `<db_id>/<db_id>.sqlite` fixtures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSet {
    pub root: PathBuf,
}

impl FixtureSet {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureSet { root: root.into() }
    }

    pub fn path(&self, db_id: &str) -> PathBuf {
        self.root.join(db_id).join(format!("{db_id}.sqlite"))
    }
}
