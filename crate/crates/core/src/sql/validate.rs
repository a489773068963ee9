//! Syntax and schema-alignment checks, plus repair suggestions.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::lexer::{tokenize, TokenKind};
use super::parser::parse_sql;
use crate::schema::{resolve_in_table, ColumnResolution, DatabaseSchema, Resolution, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    UnknownTable,
    UnknownColumn,
    CaseMismatch,
    AmbiguousColumn,
    AliasError,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::UnknownTable => "unknown_table",
            IssueKind::UnknownColumn => "unknown_column",
            IssueKind::CaseMismatch => "case_mismatch",
            IssueKind::AmbiguousColumn => "ambiguous_column",
            IssueKind::AliasError => "alias_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub offending: String,
    pub suggestion: Option<String>,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.kind.as_str(), self.offending)?;
        if let Some(s) = &self.suggestion {
            write!(f, " -> {s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub syntax_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syntax_error: Option<String>,
    pub issues: Vec<Issue>,
    pub aligned: bool,
    /// Every issue carries a suggestion, so substitution alone can fix it.
    pub repairable: bool,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        let aligned = issues.is_empty();
        let repairable = !aligned && issues.iter().all(|i| i.suggestion.is_some());
        ValidationReport {
            syntax_ok: true,
            syntax_error: None,
            issues,
            aligned,
            repairable,
        }
    }

    pub fn syntax_failure(message: impl Into<String>) -> Self {
        ValidationReport {
            syntax_ok: false,
            syntax_error: Some(message.into()),
            issues: Vec::new(),
            aligned: false,
            repairable: false,
        }
    }
}

/// Parses then validates; a parse failure becomes a `syntax_ok = false` report.
pub fn validate_sql(sql: &str, schema: &DatabaseSchema) -> ValidationReport {
    match parse_sql(sql) {
        Ok(ast) => validate(&ast, schema),
        Err(e) => ValidationReport::syntax_failure(e.to_string()),
    }
}

/// Resolves every table and column reference against `schema` and reports
/// all problems found.
pub fn validate(ast: &QueryAst, schema: &DatabaseSchema) -> ValidationReport {
    let mut v = Validator {
        schema,
        scopes: Vec::new(),
        issues: Vec::new(),
    };
    v.query(ast);
    let mut issues: Vec<Issue> = Vec::new();
    for issue in v.issues {
        if !issues.contains(&issue) {
            issues.push(issue);
        }
    }
    ValidationReport::from_issues(issues)
}

enum SourceShape<'s> {
    Table(&'s Table),
    /// A table that did not resolve; its columns are unknowable.
    Unresolved,
    /// A derived table exposing these output names; `None` when it selects `*`.
    Derived(Option<Vec<String>>),
}

struct Source<'s> {
    binding: Option<String>,
    shape: SourceShape<'s>,
}

struct Scope<'s> {
    sources: Vec<Source<'s>>,
    select_aliases: Vec<String>,
}

struct Validator<'s> {
    schema: &'s DatabaseSchema,
    scopes: Vec<Scope<'s>>,
    issues: Vec<Issue>,
}

fn issue(kind: IssueKind, offending: &str, suggestion: Option<String>) -> Issue {
    Issue {
        kind,
        offending: offending.to_string(),
        suggestion,
    }
}

fn output_names(q: &QueryAst) -> Option<Vec<String>> {
    let mut names = Vec::new();
    for item in &q.select {
        match item {
            SelectItem::Wildcard | SelectItem::QualifiedWildcard(_) => return None,
            SelectItem::Expr { alias: Some(a), .. } => names.push(a.clone()),
            SelectItem::Expr {
                expr: Expr::Column(c), ..
            } => names.push(c.name.clone()),
            SelectItem::Expr { expr, .. } => names.push(expr.to_string()),
        }
    }
    Some(names)
}

impl<'s> Validator<'s> {
    fn query(&mut self, q: &QueryAst) {
        let mut sources: Vec<Source<'s>> = Vec::new();
        for r in q.sources() {
            let shape = match &r.source {
                TableSource::Table(name) => self.table_shape(name),
                TableSource::Subquery(sub) => {
                    self.query(sub);
                    SourceShape::Derived(output_names(sub))
                }
            };
            let binding = r.binding_name().map(str::to_string);
            if let Some(b) = &binding {
                let clash = sources
                    .iter()
                    .any(|s| s.binding.as_deref().is_some_and(|o| o.eq_ignore_ascii_case(b)));
                if clash {
                    self.issues.push(issue(IssueKind::AliasError, b, None));
                }
            }
            sources.push(Source { binding, shape });
        }
        let select_aliases = q
            .select
            .iter()
            .filter_map(|i| match i {
                SelectItem::Expr { alias: Some(a), .. } => Some(a.clone()),
                _ => None,
            })
            .collect();
        self.scopes.push(Scope {
            sources,
            select_aliases,
        });

        for item in &q.select {
            match item {
                SelectItem::Wildcard => {}
                SelectItem::QualifiedWildcard(qual) => {
                    if self.find_binding(qual).is_none() {
                        self.issues.push(issue(IssueKind::AliasError, qual, None));
                    }
                }
                SelectItem::Expr { expr, .. } => self.expr(expr),
            }
        }
        for j in &q.joins {
            if let Some(c) = &j.condition {
                self.expr(c);
            }
        }
        if let Some(w) = &q.where_clause {
            self.expr(w);
        }
        for g in &q.group_by {
            self.expr(g);
        }
        if let Some(h) = &q.having {
            self.expr(h);
        }
        for o in &q.order_by {
            self.expr(&o.expr);
        }
        self.scopes.pop();

        if let Some(op) = &q.set_op {
            self.query(&op.right);
        }
    }

    fn table_shape(&mut self, name: &str) -> SourceShape<'s> {
        let schema = self.schema;
        match schema.resolve_table(name) {
            Resolution::Exact => SourceShape::Table(schema.table(name).expect("exact table exists")),
            Resolution::CaseFold(canonical) => {
                self.issues
                    .push(issue(IssueKind::CaseMismatch, name, Some(canonical.clone())));
                SourceShape::Table(schema.table(&canonical).expect("canonical table exists"))
            }
            Resolution::Absent => {
                let names: Vec<&str> = schema.tables.iter().map(|t| t.name.as_str()).collect();
                let suggestion = near_match(name, &names);
                let shape = match &suggestion {
                    // Keep checking columns against the table the name was meant to be.
                    Some(s) => SourceShape::Table(schema.table(s).expect("suggested table exists")),
                    None => SourceShape::Unresolved,
                };
                self.issues.push(issue(IssueKind::UnknownTable, name, suggestion));
                shape
            }
        }
    }

    fn find_binding(&self, qualifier: &str) -> Option<&Source<'s>> {
        self.scopes.iter().rev().find_map(|scope| {
            scope
                .sources
                .iter()
                .find(|s| s.binding.as_deref().is_some_and(|b| b.eq_ignore_ascii_case(qualifier)))
        })
    }

    fn column(&mut self, c: &ColumnName) {
        match &c.qualifier {
            Some(q) => {
                let Some(source) = self.find_binding(q) else {
                    self.issues.push(issue(IssueKind::AliasError, q, None));
                    return;
                };
                let found = match &source.shape {
                    SourceShape::Table(t) => match resolve_in_table(t, &c.name) {
                        ColumnResolution::Exact { .. } => None,
                        ColumnResolution::CaseFold { column, .. } => {
                            Some(issue(IssueKind::CaseMismatch, &c.name, Some(column)))
                        }
                        _ => {
                            let cols: Vec<&str> = t.column_names().collect();
                            Some(issue(IssueKind::UnknownColumn, &c.name, near_match(&c.name, &cols)))
                        }
                    },
                    SourceShape::Unresolved | SourceShape::Derived(None) => None,
                    SourceShape::Derived(Some(names)) => derived_lookup(names, &c.name),
                };
                self.issues.extend(found);
            }
            None => self.unqualified(&c.name),
        }
    }

    fn unqualified(&mut self, name: &str) {
        for scope in self.scopes.iter().rev() {
            let mut exact = 0;
            let mut folded: Vec<String> = Vec::new();
            let mut open = false;
            for source in &scope.sources {
                match &source.shape {
                    SourceShape::Table(t) => match resolve_in_table(t, name) {
                        ColumnResolution::Exact { .. } => exact += 1,
                        ColumnResolution::CaseFold { column, .. } => folded.push(column),
                        _ => {}
                    },
                    SourceShape::Derived(Some(names)) => {
                        if names.iter().any(|n| n == name) {
                            exact += 1;
                        } else if let Some(n) = names.iter().find(|n| n.eq_ignore_ascii_case(name)) {
                            folded.push(n.clone());
                        }
                    }
                    SourceShape::Derived(None) | SourceShape::Unresolved => open = true,
                }
            }
            match (exact, folded.len()) {
                (1, _) => return,
                (0, 1) => {
                    let canonical = folded.pop();
                    self.issues.push(issue(IssueKind::CaseMismatch, name, canonical));
                    return;
                }
                (0, 0) => {}
                _ => {
                    self.issues.push(issue(IssueKind::AmbiguousColumn, name, None));
                    return;
                }
            }
            if scope.select_aliases.iter().any(|a| a.eq_ignore_ascii_case(name)) {
                return;
            }
            if open {
                // An unresolved source may own the column; nothing to say.
                return;
            }
        }
        let current = self.scopes.last().expect("column outside any query scope");
        let columns: Vec<&str> = current
            .sources
            .iter()
            .flat_map(|s| match &s.shape {
                SourceShape::Table(t) => t.column_names().collect::<Vec<_>>(),
                SourceShape::Derived(Some(names)) => names.iter().map(String::as_str).collect(),
                _ => Vec::new(),
            })
            .collect();
        let suggestion = near_match(name, &columns);
        self.issues.push(issue(IssueKind::UnknownColumn, name, suggestion));
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Column(c) => self.column(c),
            Expr::Literal(_) | Expr::Star => {}
            Expr::Aggregate { arg, .. } => self.expr(arg),
            Expr::Function { args, .. } => args.iter().for_each(|a| self.expr(a)),
            Expr::Negate(x) | Expr::Not(x) => self.expr(x),
            Expr::Binary { left, right, .. } | Expr::Compare { left, right, .. } => {
                self.expr(left);
                self.expr(right);
            }
            Expr::Like { expr, pattern, .. } => {
                self.expr(expr);
                self.expr(pattern);
            }
            Expr::InList { expr, list, .. } => {
                self.expr(expr);
                list.iter().for_each(|x| self.expr(x));
            }
            Expr::InSubquery { expr, query, .. } => {
                self.expr(expr);
                self.query(query);
            }
            Expr::Between { expr, low, high, .. } => {
                self.expr(expr);
                self.expr(low);
                self.expr(high);
            }
            Expr::IsNull { expr, .. } => self.expr(expr),
            Expr::Exists { query, .. } | Expr::Subquery(query) => self.query(query),
            Expr::And(items) | Expr::Or(items) => items.iter().for_each(|x| self.expr(x)),
        }
    }
}

fn derived_lookup(names: &[String], name: &str) -> Option<Issue> {
    if names.iter().any(|n| n == name) {
        return None;
    }
    if let Some(n) = names.iter().find(|n| n.eq_ignore_ascii_case(name)) {
        return Some(issue(IssueKind::CaseMismatch, name, Some(n.clone())));
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Some(issue(IssueKind::UnknownColumn, name, near_match(name, &refs)))
}

fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != *cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

fn is_plural_pair(a: &str, b: &str) -> bool {
    let one = |s: &str, p: &str| {
        p.strip_suffix('s').is_some_and(|x| x == s)
            || p.strip_suffix("es").is_some_and(|x| x == s)
            || (p.strip_suffix("ies").is_some_and(|x| s.strip_suffix('y') == Some(x)))
    };
    one(a, b) || one(b, a)
}

fn is_subsequence(short: &str, long: &str) -> bool {
    let mut it = long.chars();
    short.chars().all(|c| it.any(|l| l == c))
}

/// The closest schema identifier to a misspelled `name`, when one stands out.
///
/// Tiers, best first: singular/plural forms; prefix (at least 3 characters
/// shared); abbreviation (same first letter, letters in order); edit
/// distance within a quarter of the length. The first tier with a unique
/// winner decides; a tie within the deciding tier yields `None`.
pub fn near_match(name: &str, candidates: &[&str]) -> Option<String> {
    let lower = name.to_ascii_lowercase();
    let folded: Vec<(String, &str)> = candidates.iter().map(|c| (c.to_ascii_lowercase(), *c)).collect();

    let unique = |hits: Vec<&str>| -> Option<Option<String>> {
        let mut hits = hits;
        hits.dedup();
        match hits.len() {
            0 => None,
            1 => Some(Some(hits[0].to_string())),
            _ => Some(None),
        }
    };

    if let Some(r) = unique(
        folded
            .iter()
            .filter(|(c, _)| *c == lower)
            .map(|(_, orig)| *orig)
            .collect(),
    ) {
        return r;
    }
    let tiers: [&dyn Fn(&str) -> bool; 3] = [
        &|c: &str| is_plural_pair(&lower, c),
        &|c: &str| {
            let (short, long) = if lower.len() <= c.len() {
                (lower.as_str(), c)
            } else {
                (c, lower.as_str())
            };
            short.len() >= 3 && long.starts_with(short)
        },
        &|c: &str| {
            lower.len() >= 2
                && lower.len() < c.len()
                && lower.chars().next() == c.chars().next()
                && is_subsequence(&lower, c)
        },
    ];
    for tier in tiers {
        let hits: Vec<&str> = folded.iter().filter(|(c, _)| tier(c)).map(|(_, o)| *o).collect();
        if let Some(r) = unique(hits) {
            return r;
        }
    }
    let limit = (lower.chars().count() / 4).max(1);
    let scored: Vec<(usize, &str)> = folded
        .iter()
        .map(|(c, o)| (levenshtein(&lower, c), *o))
        .filter(|(d, _)| *d <= limit)
        .collect();
    let best = scored.iter().map(|(d, _)| *d).min()?;
    unique(scored.iter().filter(|(d, _)| *d == best).map(|(_, o)| *o).collect()).flatten()
}

/// Substitutions derived from a report plus the clarification directive
/// appended to refinement prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repairs {
    pub substitutions: Vec<(String, String)>,
    pub directive: String,
}

pub const DIRECTIVE_PREFIX: &str = "Use the exact table and field names from the schema: ";

pub fn clarification_directive(schema: &DatabaseSchema) -> String {
    format!("{DIRECTIVE_PREFIX}{}", schema.identifier_names().join(", "))
}

pub fn suggest_repairs(report: &ValidationReport, schema: &DatabaseSchema) -> Repairs {
    let mut substitutions: Vec<(String, String)> = Vec::new();
    for i in &report.issues {
        if let Some(s) = &i.suggestion {
            let pair = (i.offending.clone(), s.clone());
            if !substitutions.contains(&pair) {
                substitutions.push(pair);
            }
        }
    }
    Repairs {
        substitutions,
        directive: clarification_directive(schema),
    }
}

/// Rewrites identifier tokens named in `repairs`, leaving every other byte
/// of `sql` untouched. Text that does not tokenize comes back unchanged.
pub fn apply_repairs(sql: &str, repairs: &Repairs) -> String {
    let Ok(tokens) = tokenize(sql) else {
        return sql.to_string();
    };
    let mut out = String::with_capacity(sql.len());
    let mut last = 0;
    for t in &tokens {
        let name = match &t.kind {
            TokenKind::Word(w) if !is_reserved(w) => w,
            TokenKind::QuotedIdent(w) => w,
            _ => continue,
        };
        if let Some((_, to)) = repairs.substitutions.iter().find(|(from, _)| from == name) {
            out.push_str(&sql[last..t.offset]);
            if matches!(t.kind, TokenKind::QuotedIdent(_)) {
                out.push('`');
                out.push_str(to);
                out.push('`');
            } else {
                out.push_str(to);
            }
            last = t.end;
        }
    }
    out.push_str(&sql[last..]);
    out
}
