//! Question/SQL datasets: loading, text cleanup, training-string rendering
//! and seeded train/held-out partitioning.

use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::schema::{DatabaseSchema, SchemaCatalog};

pub const INSTRUCTION_LABEL: &str = "# Instruction:";
pub const SCHEMA_LABEL: &str = "# Schema:";
pub const RESPONSE_LABEL: &str = "# Response:";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("record {index}: missing field '{field}'")]
    MissingField { index: usize, field: &'static str },
    #[error("record {index}: field '{field}' is empty")]
    EmptyField { index: usize, field: &'static str },
    #[error("record {index}: unknown schema '{schema_id}'")]
    UnknownSchema { index: usize, schema_id: String },
    #[error("point schema '{point}' does not match schema '{schema}'")]
    SchemaMismatch { point: String, schema: String },
    #[error("cannot split fewer than 2 points (got {0})")]
    TooFewPoints(usize),
    #[error("split fraction must lie strictly between 0 and 1 (got {0})")]
    BadFraction(f64),
    #[error("malformed training string: {0}")]
    MalformedTrainingString(String),
}

/// One (instruction, schema reference, gold SQL) triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePoint {
    pub id: String,
    #[serde(rename = "question")]
    pub instruction: String,
    #[serde(rename = "db_id")]
    pub schema_id: String,
    #[serde(rename = "query")]
    pub gold_sql: String,
}

impl ExamplePoint {
    pub fn new(
        id: impl Into<String>,
        instruction: impl Into<String>,
        schema_id: impl Into<String>,
        gold_sql: impl Into<String>,
    ) -> Self {
        ExamplePoint {
            id: id.into(),
            instruction: instruction.into(),
            schema_id: schema_id.into(),
            gold_sql: gold_sql.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(default, alias = "instruction")]
    question: Option<String>,
    #[serde(default, alias = "schema_id")]
    db_id: Option<String>,
    #[serde(default, alias = "gold_sql")]
    query: Option<String>,
}

/// Splits a dataset document into JSON records. JSON Lines is the native
/// format; a document starting with `[` is read as a JSON array (SPIDER's
/// `train_spider.json` / `dev.json`).
fn json_records(text: &str) -> Result<Vec<serde_json::Value>, CorpusError> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            index: 0,
            message: e.to_string(),
        });
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(index, line)| {
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                index,
                message: e.to_string(),
            })
        })
        .collect()
}

fn point_from_value(index: usize, value: serde_json::Value) -> Result<ExamplePoint, CorpusError> {
    let raw: RawRecord = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
        index,
        message: e.to_string(),
    })?;
    let required = |v: Option<String>, field: &'static str| match v {
        None => Err(CorpusError::MissingField { index, field }),
        Some(s) if s.trim().is_empty() => Err(CorpusError::EmptyField { index, field }),
        Some(s) => Ok(s),
    };
    let id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(other) => other.to_string(),
        None => index.to_string(),
    };
    Ok(ExamplePoint {
        id,
        instruction: required(raw.question, "question")?,
        schema_id: required(raw.db_id, "db_id")?,
        gold_sql: required(raw.query, "query")?,
    })
}

/// Parses every record independently; malformed records surface as
/// per-record errors instead of failing the whole document.
pub fn parse_records(text: &str) -> Result<Vec<Result<ExamplePoint, CorpusError>>, CorpusError> {
    Ok(json_records(text)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| point_from_value(i, v))
        .collect())
}

/// Loads a dataset and checks every point's schema against the catalog.
pub fn load_corpus(text: &str, catalog: &SchemaCatalog) -> Result<Vec<ExamplePoint>, CorpusError> {
    let mut points = Vec::new();
    for (index, record) in parse_records(text)?.into_iter().enumerate() {
        let point = record?;
        if catalog.get(&point.schema_id).is_none() {
            return Err(CorpusError::UnknownSchema {
                index,
                schema_id: point.schema_id,
            });
        }
        points.push(point);
    }
    log::debug!("loaded {} corpus points", points.len());
    Ok(points)
}

/// Serializes points as JSON Lines, one record per line.
pub fn serialize_corpus(points: &[ExamplePoint]) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&serde_json::to_string(p).expect("corpus serialization is infallible"));
        out.push('\n');
    }
    out
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*```[A-Za-z0-9_+-]*[ \t]*$").unwrap());
static INLINE_FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"```[A-Za-z0-9_+-]*").unwrap());
static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][A-Za-z0-9-]*(\s[^<>]*)?/?>").unwrap());
static USER_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)(^|[ \t]+)@\w+").unwrap());
static HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*#{1,6}[ \t]+").unwrap());
static BOLD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\*\*|__)([^\n]+?)(\*\*|__)").unwrap());
static ITALIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|\s)\*(\w[\w ]*?\w|\w)\*(\W|$)").unwrap());
static INLINE_CODE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"`([^`\n]+)`").unwrap());

fn preprocess_pass(raw: &str) -> String {
    let text = raw.replace("\r\n", "\n");
    let text = FENCE.replace_all(&text, "");
    let text = INLINE_FENCE.replace_all(&text, "");
    let text = HTML_TAG.replace_all(&text, "");
    let text = USER_TAG.replace_all(&text, "");
    let text = HEADER.replace_all(&text, "");
    let text = BOLD.replace_all(&text, "$2");
    let text = ITALIC.replace_all(&text, "$1$2$3");
    let text = INLINE_CODE.replace_all(&text, "$1");
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Removes blank-line runs, `@user` tags, HTML tags and Markdown fences,
/// emphasis and headers. Every rewrite only deletes characters, so
/// iterating to a fixpoint terminates and makes the result idempotent.
pub fn preprocess(raw: &str) -> String {
    let mut current = preprocess_pass(raw);
    loop {
        let next = preprocess_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// A rendered `{Instruction, Schema, Response}` training string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingString {
    pub text: String,
}

/// Labeled parts recovered from a training string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingParts {
    pub instruction: String,
    pub schema: String,
    pub response: String,
}

pub fn format_training_point(point: &ExamplePoint, schema: &DatabaseSchema) -> Result<TrainingString, CorpusError> {
    if point.schema_id != schema.name {
        return Err(CorpusError::SchemaMismatch {
            point: point.schema_id.clone(),
            schema: schema.name.clone(),
        });
    }
    Ok(TrainingString {
        text: render_blocks(&point.instruction, &schema.render_inline(), &point.gold_sql),
    })
}

pub(crate) fn render_blocks(instruction: &str, schema: &str, response: &str) -> String {
    let mut text = format!("{INSTRUCTION_LABEL}\n\"{instruction}\"\n\n{SCHEMA_LABEL}\n{schema}\n\n{RESPONSE_LABEL}\n");
    if !response.is_empty() {
        text.push_str(response);
        text.push('\n');
    }
    text
}

impl TrainingString {
    /// Splits the string back into its three labeled blocks.
    pub fn parse(&self) -> Result<TrainingParts, CorpusError> {
        let bad = |m: &str| CorpusError::MalformedTrainingString(m.to_string());
        let rest = self
            .text
            .strip_prefix(&format!("{INSTRUCTION_LABEL}\n"))
            .ok_or_else(|| bad("missing instruction label"))?;
        let (instruction, rest) = rest
            .split_once(&format!("\n\n{SCHEMA_LABEL}\n"))
            .ok_or_else(|| bad("missing schema label"))?;
        let (schema, response) = rest
            .split_once(&format!("\n\n{RESPONSE_LABEL}\n"))
            .ok_or_else(|| bad("missing response label"))?;
        let instruction = instruction
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .ok_or_else(|| bad("instruction is not quoted"))?;
        Ok(TrainingParts {
            instruction: instruction.to_string(),
            schema: schema.to_string(),
            response: response.strip_suffix('\n').unwrap_or(response).to_string(),
        })
    }
}

/// Seeded partition into `(train, held_out)`; both sides keep corpus order.
pub fn split_corpus(
    points: &[ExamplePoint],
    seed: u64,
    fraction: f64,
) -> Result<(Vec<ExamplePoint>, Vec<ExamplePoint>), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::BadFraction(fraction));
    }
    let n = points.len();
    if n < 2 {
        return Err(CorpusError::TooFewPoints(n));
    }
    let train_len = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..train_len] {
        in_train[i] = true;
    }
    let (train, held): (Vec<_>, Vec<_>) = points.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(p, _)| p).collect(),
        held.into_iter().map(|(p, _)| p).collect(),
    ))
}
