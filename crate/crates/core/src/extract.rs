//! Post-processing of raw completions into one clean SQL statement.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::sql::parse_sql;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub sql: String,
    /// Characters of the cleaned text before the chosen statement.
    pub discarded_prefix_len: usize,
    /// Characters of the cleaned text after the chosen statement.
    pub discarded_suffix_len: usize,
    pub backslashes_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no SQL statement found in model output")]
    NoSql { raw: String },
}

impl ExtractError {
    pub fn raw(&self) -> &str {
        match self {
            ExtractError::NoSql { raw } => raw,
        }
    }
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"```[A-Za-z0-9_-]*").unwrap());
static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)#[ \t]*Response[ \t]*:|^[ \t]*SQL[ \t]*:").unwrap());
static START: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(SELECT|WITH)\b").unwrap());
static NEWLINES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]*[\r\n][ \t\r\n]*").unwrap());

/// Deletes every backslash. The escapes `\n`, `\r` and `\t` become the
/// whitespace they stand for so that words on either side stay apart.
fn strip_backslashes(raw: &str) -> (String, usize) {
    let mut out = String::with_capacity(raw.len());
    let mut removed = 0;
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        removed += 1;
        match chars.peek() {
            Some('n') | Some('r') => {
                chars.next();
                out.push('\n');
            }
            Some('t') => {
                chars.next();
                out.push(' ');
            }
            _ => {}
        }
    }
    (out, removed)
}

/// Byte ranges of `text` split at semicolons and blank lines that sit
/// outside quotes. The flag says whether the piece ended at a semicolon.
fn segments(text: &str) -> Vec<(usize, usize, bool)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut quote: Option<u8> = None;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if let Some(q) = quote {
            if b == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match b {
            b'\'' | b'"' | b'`' => quote = Some(b),
            b';' => {
                out.push((start, i + 1, true));
                start = i + 1;
            }
            b'\n' => {
                let mut j = i + 1;
                while j < bytes.len() && matches!(bytes[j], b' ' | b'\t' | b'\r') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'\n' {
                    out.push((start, i, false));
                    start = j;
                    i = j;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if start < bytes.len() {
        out.push((start, bytes.len(), false));
    }
    out
}

fn tidy(stmt: &str) -> String {
    NEWLINES.replace_all(stmt.trim(), " ").into_owned()
}

/// Picks the SQL statement out of a raw completion.
///
/// Everything before the last response marker is treated as echoed
/// prompt. Among the remaining statements the last one that parses wins;
/// when none parses, the last one that starts with a SQL keyword.
pub fn extract_sql(raw: &str) -> Result<ExtractionResult, ExtractError> {
    let (clean, backslashes_removed) = strip_backslashes(raw);
    // A fence behaves like a paragraph break.
    let clean = FENCE.replace_all(&clean, "\n\n").into_owned();
    let region_start = MARKER.find_iter(&clean).last().map(|m| m.end()).unwrap_or(0);
    let region = &clean[region_start..];

    let mut parsed: Option<(usize, usize)> = None;
    let mut fallback: Option<(usize, usize)> = None;
    for (s, e, _) in segments(region) {
        let piece = &region[s..e];
        let mut first_start = None;
        for m in START.find_iter(piece) {
            let candidate = &piece[m.start()..];
            first_start.get_or_insert(m.start());
            if parse_sql(&tidy(candidate)).is_ok() {
                parsed = Some((s + m.start(), e));
                break;
            }
        }
        if let Some(off) = first_start {
            fallback = Some((s + off, e));
        }
    }
    let Some((s, e)) = parsed.or(fallback) else {
        return Err(ExtractError::NoSql { raw: raw.to_string() });
    };
    let sql = tidy(&region[s..e]);
    if sql.is_empty() {
        return Err(ExtractError::NoSql { raw: raw.to_string() });
    }
    let abs_start = region_start + s;
    let abs_end = region_start + e;
    Ok(ExtractionResult {
        sql,
        discarded_prefix_len: clean[..abs_start].chars().count(),
        discarded_suffix_len: clean[abs_end..].chars().count(),
        backslashes_removed,
    })
}
