//! Canonical form for query comparison.
//!
//! Identifiers are ASCII-lowercased, every source gets a positional alias
//! (`t1`, `t2`, ... at the top level, `d<depth>t<i>` inside subqueries so an
//! inner alias never shadows an outer one), AND/OR operands and IN lists
//! are sorted by their printed form, and comparisons put column references
//! before literals. String literals are kept verbatim and numeric literals
//! are rewritten to their shortest decimal spelling.

use super::ast::*;
use crate::schema::DatabaseSchema;

/// Canonicalizes without schema knowledge. An unqualified column is bound
/// to a source only when the query level has exactly one source.
pub fn canonicalize(ast: &QueryAst) -> QueryAst {
    canonicalize_with(ast, None)
}

/// Canonicalizes using `schema` to bind unqualified columns to the one
/// in-scope table that owns them.
pub fn canonicalize_with(ast: &QueryAst, schema: Option<&DatabaseSchema>) -> QueryAst {
    let mut c = Canon {
        schema,
        scopes: Vec::new(),
    };
    c.query(ast, 0)
}

/// The canonical form printed as SQL text.
pub fn canonical_text(ast: &QueryAst) -> String {
    canonicalize(ast).to_string()
}

struct Binding {
    /// Lowercased name the query used for the source.
    old: String,
    new: String,
    /// Lowercased table name for plain table sources.
    table: Option<String>,
}

struct Canon<'a> {
    schema: Option<&'a DatabaseSchema>,
    scopes: Vec<Vec<Binding>>,
}

fn alias_for(depth: usize, index: usize) -> String {
    if depth == 0 {
        format!("t{}", index + 1)
    } else {
        format!("d{depth}t{}", index + 1)
    }
}

impl Canon<'_> {
    fn query(&mut self, q: &QueryAst, depth: usize) -> QueryAst {
        let mut bindings = Vec::new();
        let mut source = |c: &mut Self, r: &TableRef, index: usize| -> TableRef {
            let new = alias_for(depth, index);
            let (src, table) = match &r.source {
                TableSource::Table(t) => {
                    let t = t.to_ascii_lowercase();
                    (TableSource::Table(t.clone()), Some(t))
                }
                TableSource::Subquery(s) => (TableSource::Subquery(Box::new(c.query(s, depth + 1))), None),
            };
            bindings.push(Binding {
                old: r.binding_name().unwrap_or_default().to_ascii_lowercase(),
                new: new.clone(),
                table,
            });
            TableRef {
                source: src,
                alias: Some(new),
            }
        };
        let from: Vec<TableRef> = q.from.iter().enumerate().map(|(i, r)| source(self, r, i)).collect();
        let join_sources: Vec<TableRef> = q
            .joins
            .iter()
            .enumerate()
            .map(|(i, j)| source(self, &j.source, from.len() + i))
            .collect();

        self.scopes.push(bindings);
        let select = q
            .select
            .iter()
            .map(|item| match item {
                SelectItem::Wildcard => SelectItem::Wildcard,
                SelectItem::QualifiedWildcard(qual) => SelectItem::QualifiedWildcard(self.qualifier(qual)),
                SelectItem::Expr { expr, alias } => SelectItem::Expr {
                    expr: self.expr(expr, depth),
                    alias: alias.as_ref().map(|a| a.to_ascii_lowercase()),
                },
            })
            .collect();
        let joins = q
            .joins
            .iter()
            .zip(join_sources)
            .map(|(j, source)| Join {
                kind: j.kind,
                source,
                condition: j.condition.as_ref().map(|c| self.expr(c, depth)),
            })
            .collect();
        let where_clause = q.where_clause.as_ref().map(|e| self.expr(e, depth));
        let group_by = q.group_by.iter().map(|e| self.expr(e, depth)).collect();
        let having = q.having.as_ref().map(|e| self.expr(e, depth));
        let order_by = q
            .order_by
            .iter()
            .map(|o| OrderItem {
                expr: self.expr(&o.expr, depth),
                direction: o.direction,
            })
            .collect();
        self.scopes.pop();

        let set_op = q.set_op.as_ref().map(|op| SetOperation {
            kind: op.kind,
            right: Box::new(self.query(&op.right, depth)),
        });
        QueryAst {
            distinct: q.distinct,
            select,
            from,
            joins,
            where_clause,
            group_by,
            having,
            order_by,
            limit: q.limit,
            set_op,
        }
    }

    fn qualifier(&self, qual: &str) -> String {
        let q = qual.to_ascii_lowercase();
        self.scopes
            .iter()
            .rev()
            .find_map(|scope| scope.iter().find(|b| b.old == q))
            .map_or(q, |b| b.new.clone())
    }

    fn owner_of(&self, column: &str) -> Option<String> {
        let current = self.scopes.last()?;
        let Some(schema) = self.schema else {
            return (current.len() == 1).then(|| current[0].new.clone());
        };
        for scope in self.scopes.iter().rev() {
            let owners: Vec<&Binding> = scope
                .iter()
                .filter(|b| {
                    b.table
                        .as_deref()
                        .and_then(|t| schema.table_folded(t))
                        .is_some_and(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
                })
                .collect();
            match owners.len() {
                0 => continue,
                1 => return Some(owners[0].new.clone()),
                _ => return None,
            }
        }
        None
    }

    fn column(&self, c: &ColumnName) -> ColumnName {
        let name = c.name.to_ascii_lowercase();
        let qualifier = match &c.qualifier {
            Some(q) => Some(self.qualifier(q)),
            None => self.owner_of(&name),
        };
        ColumnName { qualifier, name }
    }

    fn expr(&mut self, e: &Expr, depth: usize) -> Expr {
        let sub = |c: &mut Self, x: &Expr| Box::new(c.expr(x, depth));
        match e {
            Expr::Column(c) => Expr::Column(self.column(c)),
            Expr::Literal(l) => Expr::Literal(canonical_literal(l)),
            Expr::Star => Expr::Star,
            Expr::Aggregate { func, distinct, arg } => Expr::Aggregate {
                func: *func,
                distinct: *distinct,
                arg: sub(self, arg),
            },
            Expr::Function { name, args } => Expr::Function {
                name: name.to_ascii_lowercase(),
                args: args.iter().map(|a| self.expr(a, depth)).collect(),
            },
            Expr::Negate(x) => match self.expr(x, depth) {
                Expr::Literal(Literal::Num(n)) => Expr::Literal(Literal::Num(negate_number(&n))),
                other => Expr::Negate(Box::new(other)),
            },
            Expr::Binary { op, left, right } => Expr::Binary {
                op: *op,
                left: sub(self, left),
                right: sub(self, right),
            },
            Expr::Compare { op, left, right } => {
                let l = self.expr(left, depth);
                let r = self.expr(right, depth);
                if should_swap(&l, &r) {
                    Expr::Compare {
                        op: op.flipped(),
                        left: Box::new(r),
                        right: Box::new(l),
                    }
                } else {
                    Expr::Compare {
                        op: *op,
                        left: Box::new(l),
                        right: Box::new(r),
                    }
                }
            }
            Expr::Like { negated, expr, pattern } => Expr::Like {
                negated: *negated,
                expr: sub(self, expr),
                pattern: sub(self, pattern),
            },
            Expr::InList { negated, expr, list } => {
                let mut list: Vec<Expr> = list.iter().map(|x| self.expr(x, depth)).collect();
                list.sort_by_cached_key(ToString::to_string);
                Expr::InList {
                    negated: *negated,
                    expr: sub(self, expr),
                    list,
                }
            }
            Expr::InSubquery { negated, expr, query } => Expr::InSubquery {
                negated: *negated,
                expr: sub(self, expr),
                query: Box::new(self.query(query, depth + 1)),
            },
            Expr::Between {
                negated,
                expr,
                low,
                high,
            } => Expr::Between {
                negated: *negated,
                expr: sub(self, expr),
                low: sub(self, low),
                high: sub(self, high),
            },
            Expr::IsNull { negated, expr } => Expr::IsNull {
                negated: *negated,
                expr: sub(self, expr),
            },
            Expr::Exists { negated, query } => Expr::Exists {
                negated: *negated,
                query: Box::new(self.query(query, depth + 1)),
            },
            Expr::Subquery(q) => Expr::Subquery(Box::new(self.query(q, depth + 1))),
            Expr::And(items) | Expr::Or(items) => {
                let or = matches!(e, Expr::Or(_));
                let items: Vec<Expr> = items.iter().map(|x| self.expr(x, depth)).collect();
                let flat = super::parser::flatten(items, or);
                match flat {
                    Expr::And(mut v) => {
                        v.sort_by_cached_key(ToString::to_string);
                        Expr::And(v)
                    }
                    Expr::Or(mut v) => {
                        v.sort_by_cached_key(ToString::to_string);
                        Expr::Or(v)
                    }
                    other => other,
                }
            }
            Expr::Not(x) => Expr::Not(sub(self, x)),
        }
    }
}

fn operand_rank(e: &Expr) -> u8 {
    match e {
        Expr::Column(_) => 0,
        Expr::Subquery(_) => 2,
        Expr::Literal(_) => 3,
        _ => 1,
    }
}

fn should_swap(l: &Expr, r: &Expr) -> bool {
    let (rl, rr) = (operand_rank(l), operand_rank(r));
    rl > rr || (rl == rr && l.to_string() > r.to_string())
}

fn canonical_literal(l: &Literal) -> Literal {
    match l {
        Literal::Num(n) => Literal::Num(normalize_number(n)),
        other => other.clone(),
    }
}

fn negate_number(n: &str) -> String {
    match n.strip_prefix('-') {
        Some(rest) => normalize_number(rest),
        None => normalize_number(&format!("-{n}")),
    }
}

/// Shortest plain decimal spelling of a numeric literal: `050.10` → `50.1`,
/// `1e3` → `1000`, `-0.0` → `0`. Text that is not a number comes back as is.
pub fn normalize_number(text: &str) -> String {
    let (negative, body) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => match body[i + 1..].parse::<i64>() {
            Ok(e) if e.abs() <= 1000 => (&body[..i], e),
            _ => return text.to_string(),
        },
        None => (body, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return text.to_string();
    }
    let mut digits: String = format!("{int}{frac}");
    let mut point = int.len() as i64 + exp;
    let leading = digits.len() - digits.trim_start_matches('0').len();
    digits.drain(..leading);
    point -= leading as i64;
    let trimmed = digits.trim_end_matches('0').len();
    digits.truncate(trimmed);
    if digits.is_empty() {
        return "0".to_string();
    }
    let len = digits.len() as i64;
    let plain = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point >= len {
        format!("{digits}{}", "0".repeat((point - len) as usize))
    } else {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    };
    if negative {
        format!("-{plain}")
    } else {
        plain
    }
}
