//! Exact set match over canonical query segments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::schema::DatabaseSchema;
use crate::sql::ast::*;
use crate::sql::{canonicalize_with, parse_sql};

/// Bumped whenever the segment list or its comparison rules change.
pub const SEGMENT_VERSION: &str = "em-segments/1";
pub const SEGMENTS: [&str; 8] = [
    "select", "from", "where", "group_by", "having", "order_by", "limit", "set_op",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Compare every string or numeric literal as a wildcard.
    pub ignore_literals: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmVerdict {
    pub em: bool,
    /// Names of mismatching segments, or `syntax` when either side fails to parse.
    pub diff: Vec<String>,
}

fn mask_query(q: &mut QueryAst) {
    for item in &mut q.select {
        if let SelectItem::Expr { expr, .. } = item {
            mask_expr(expr);
        }
    }
    for r in q.from.iter_mut().chain(q.joins.iter_mut().map(|j| &mut j.source)) {
        if let TableSource::Subquery(sub) = &mut r.source {
            mask_query(sub);
        }
    }
    for j in &mut q.joins {
        if let Some(c) = &mut j.condition {
            mask_expr(c);
        }
    }
    for e in q
        .where_clause
        .iter_mut()
        .chain(q.having.iter_mut())
        .chain(q.group_by.iter_mut())
    {
        mask_expr(e);
    }
    for o in &mut q.order_by {
        mask_expr(&mut o.expr);
    }
    if let Some(op) = &mut q.set_op {
        mask_query(&mut op.right);
    }
}

fn mask_expr(e: &mut Expr) {
    match e {
        Expr::Literal(Literal::Str(_) | Literal::Num(_)) => *e = Expr::Literal(Literal::Str("?".into())),
        Expr::Column(_) | Expr::Literal(Literal::Null) | Expr::Star => {}
        // A negated literal is a literal too.
        Expr::Negate(inner) if inner.is_literal() => *e = Expr::Literal(Literal::Str("?".into())),
        Expr::Negate(x) | Expr::Not(x) => mask_expr(x),
        Expr::Aggregate { arg, .. } => mask_expr(arg),
        Expr::Function { args, .. } => args.iter_mut().for_each(mask_expr),
        Expr::Binary { left, right, .. } | Expr::Compare { left, right, .. } => {
            mask_expr(left);
            mask_expr(right);
        }
        Expr::Like { expr, pattern, .. } => {
            mask_expr(expr);
            mask_expr(pattern);
        }
        Expr::InList { expr, list, .. } => {
            mask_expr(expr);
            list.iter_mut().for_each(mask_expr);
        }
        Expr::InSubquery { expr, query, .. } => {
            mask_expr(expr);
            mask_query(query);
        }
        Expr::Between { expr, low, high, .. } => {
            mask_expr(expr);
            mask_expr(low);
            mask_expr(high);
        }
        Expr::IsNull { expr, .. } => mask_expr(expr),
        Expr::Exists { query, .. } | Expr::Subquery(query) => mask_query(query),
        Expr::And(items) | Expr::Or(items) => items.iter_mut().for_each(mask_expr),
    }
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn to_strings<T: std::fmt::Display>(items: &[T]) -> Vec<String> {
    items.iter().map(ToString::to_string).collect()
}

/// Comparable key of every segment of a canonical query.
fn segments(q: &QueryAst) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    let select = sorted(to_strings(&q.select));
    m.insert("select", format!("distinct={} {:?}", q.distinct, select));
    let mut sources = to_strings(&q.from);
    let mut conditions = Vec::new();
    for j in &q.joins {
        sources.push(format!("{:?} {}", j.kind, j.source));
        if let Some(c) = &j.condition {
            conditions.push(c.to_string());
        }
    }
    m.insert("from", format!("{:?} on {:?}", sorted(sources), sorted(conditions)));
    m.insert(
        "where",
        q.where_clause.as_ref().map(ToString::to_string).unwrap_or_default(),
    );
    m.insert("group_by", format!("{:?}", sorted(to_strings(&q.group_by))));
    m.insert("having", q.having.as_ref().map(ToString::to_string).unwrap_or_default());
    m.insert("order_by", format!("{:?}", to_strings(&q.order_by)));
    m.insert("limit", format!("{:?}", q.limit));
    m.insert(
        "set_op",
        match &q.set_op {
            None => String::new(),
            Some(op) => {
                let inner: Vec<String> = segments(&op.right)
                    .into_iter()
                    .map(|(k, v)| format!("{k}:{v}"))
                    .collect();
                format!("{} {:?}", op.kind.as_str(), inner)
            }
        },
    );
    m
}

fn prepare(sql: &str, opts: &EmOptions, schema: Option<&DatabaseSchema>) -> Option<QueryAst> {
    let mut ast = parse_sql(sql).ok()?;
    if opts.ignore_literals {
        mask_query(&mut ast);
    }
    Some(canonicalize_with(&ast, schema))
}

/// Compares canonical forms segment by segment. The diff lists the
/// mismatching segments in a fixed order.
pub fn exact_set_match_with(pred: &str, gold: &str, opts: &EmOptions, schema: Option<&DatabaseSchema>) -> EmVerdict {
    let (Some(p), Some(g)) = (prepare(pred, opts, schema), prepare(gold, opts, schema)) else {
        return EmVerdict {
            em: false,
            diff: vec!["syntax".into()],
        };
    };
    let (ps, gs) = (segments(&p), segments(&g));
    let diff: Vec<String> = SEGMENTS
        .iter()
        .filter(|s| ps.get(*s) != gs.get(*s))
        .map(|s| s.to_string())
        .collect();
    EmVerdict {
        em: diff.is_empty(),
        diff,
    }
}

pub fn exact_set_match(pred: &str, gold: &str, opts: &EmOptions) -> EmVerdict {
    exact_set_match_with(pred, gold, opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WYOMING: &str = "SELECT city_name FROM city WHERE population = \
        (SELECT MAX(population) FROM city WHERE state_name = 'wyoming') AND state_name = 'wyoming'";

    #[test]
    fn case_and_terminator_do_not_matter() {
        let v = exact_set_match(
            "SELECT name FROM Employees WHERE salary > 50000",
            "select name from employees where salary > 50000;",
            &EmOptions::default(),
        );
        assert!(v.em, "{v:?}");
    }

    #[test]
    fn wyoming_pair_differs_in_where_and_order() {
        let v = exact_set_match(
            WYOMING,
            "SELECT city_name FROM city WHERE state_name='wyoming' ORDER BY population DESC LIMIT 1",
            &EmOptions::default(),
        );
        assert!(!v.em);
        assert!(v.diff.contains(&"where".to_string()));
        assert!(v.diff.contains(&"order_by".to_string()));
        assert!(v.diff.contains(&"limit".to_string()));
    }

    #[test]
    fn select_is_a_set() {
        let v = exact_set_match("SELECT a, b FROM t", "SELECT b, a FROM t", &EmOptions::default());
        assert!(v.em);
        let v = exact_set_match(
            "SELECT a FROM t ORDER BY a, b",
            "SELECT a FROM t ORDER BY b, a",
            &EmOptions::default(),
        );
        assert_eq!(v.diff, ["order_by"]);
    }

    #[test]
    fn literals_optional() {
        let (p, g) = ("SELECT a FROM t WHERE b = 'x'", "SELECT a FROM t WHERE b = 'y'");
        assert_eq!(exact_set_match(p, g, &EmOptions::default()).diff, ["where"]);
        assert!(exact_set_match(p, g, &EmOptions { ignore_literals: true }).em);
    }

    #[test]
    fn parse_failure_is_syntax() {
        let v = exact_set_match("SELEC a FROM t", "SELECT a FROM t", &EmOptions::default());
        assert_eq!(v.diff, ["syntax"]);
    }
}
