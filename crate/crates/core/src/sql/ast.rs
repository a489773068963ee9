//! Query tree for the SPIDER gold-query subset and its SQL printer.

use std::fmt::{self, Display, Formatter, Write};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct QueryAst {
    pub distinct: bool,
    pub select: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub joins: Vec<Join>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub set_op: Option<SetOperation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(String),
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TableSource {
    Table(String),
    Subquery(Box<QueryAst>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRef {
    pub source: TableSource,
    pub alias: Option<String>,
}

impl TableRef {
    pub fn table(name: impl Into<String>, alias: Option<&str>) -> Self {
        TableRef {
            source: TableSource::Table(name.into()),
            alias: alias.map(str::to_string),
        }
    }

    /// The name this source is referenced by in expressions.
    pub fn binding_name(&self) -> Option<&str> {
        match (&self.alias, &self.source) {
            (Some(a), _) => Some(a),
            (None, TableSource::Table(t)) => Some(t),
            (None, TableSource::Subquery(_)) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JoinKind {
    Inner,
    Left,
    Right,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Join {
    pub kind: JoinKind,
    pub source: TableRef,
    pub condition: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SetOpKind {
    Union,
    UnionAll,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetOperation {
    pub kind: SetOpKind,
    pub right: Box<QueryAst>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderItem {
    pub expr: Expr,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnName {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Literal {
    Str(String),
    /// Numeric text as written (sign included).
    Num(String),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn from_name(name: &str) -> Option<AggFunc> {
        Some(match name.to_ascii_uppercase().as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "AVG" => AggFunc::Avg,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator that keeps the meaning when operands swap sides.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
}

impl ArithOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Mod => "%",
            ArithOp::Concat => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Expr {
    Column(ColumnName),
    Literal(Literal),
    /// The `*` in `COUNT(*)`.
    Star,
    Aggregate {
        func: AggFunc,
        distinct: bool,
        arg: Box<Expr>,
    },
    Function {
        name: String,
        args: Vec<Expr>,
    },
    Negate(Box<Expr>),
    Binary {
        op: ArithOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Compare {
        op: CmpOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Like {
        negated: bool,
        expr: Box<Expr>,
        pattern: Box<Expr>,
    },
    InList {
        negated: bool,
        expr: Box<Expr>,
        list: Vec<Expr>,
    },
    InSubquery {
        negated: bool,
        expr: Box<Expr>,
        query: Box<QueryAst>,
    },
    Between {
        negated: bool,
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
    },
    IsNull {
        negated: bool,
        expr: Box<Expr>,
    },
    Exists {
        negated: bool,
        query: Box<QueryAst>,
    },
    Subquery(Box<QueryAst>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn column(qualifier: Option<&str>, name: &str) -> Expr {
        Expr::Column(ColumnName {
            qualifier: qualifier.map(str::to_string),
            name: name.to_string(),
        })
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Literal(_))
    }

    /// Printed without surrounding parentheses when nested.
    fn is_atomic(&self) -> bool {
        matches!(
            self,
            Expr::Column(_)
                | Expr::Literal(_)
                | Expr::Star
                | Expr::Aggregate { .. }
                | Expr::Function { .. }
                | Expr::Subquery(_)
                | Expr::Exists { .. }
        )
    }
}

pub const RESERVED: &[&str] = &[
    "SELECT",
    "FROM",
    "WHERE",
    "GROUP",
    "BY",
    "HAVING",
    "ORDER",
    "LIMIT",
    "UNION",
    "INTERSECT",
    "EXCEPT",
    "JOIN",
    "ON",
    "AS",
    "AND",
    "OR",
    "NOT",
    "IN",
    "LIKE",
    "BETWEEN",
    "IS",
    "NULL",
    "DISTINCT",
    "ASC",
    "DESC",
    "INNER",
    "LEFT",
    "RIGHT",
    "OUTER",
    "CROSS",
    "EXISTS",
    "ALL",
    "OFFSET",
    "USING",
    "NATURAL",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

fn write_ident(f: &mut Formatter<'_>, name: &str) -> fmt::Result {
    let plain = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
    if plain && !is_reserved(name) {
        f.write_str(name)
    } else {
        write!(f, "`{}`", name.replace('`', "``"))
    }
}

fn write_nested(f: &mut Formatter<'_>, e: &Expr) -> fmt::Result {
    if e.is_atomic() {
        write!(f, "{e}")
    } else {
        write!(f, "({e})")
    }
}

fn write_list<T: Display>(f: &mut Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn not_kw(negated: bool) -> &'static str {
    if negated {
        "NOT "
    } else {
        ""
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Num(n) => f.write_str(n),
            Literal::Null => f.write_str("NULL"),
        }
    }
}

impl Display for ColumnName {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(q) = &self.qualifier {
            write_ident(f, q)?;
            f.write_char('.')?;
        }
        write_ident(f, &self.name)
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => write!(f, "{c}"),
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Star => f.write_char('*'),
            Expr::Aggregate { func, distinct, arg } => {
                write!(
                    f,
                    "{}({}{arg})",
                    func.as_str(),
                    if *distinct { "DISTINCT " } else { "" }
                )
            }
            Expr::Function { name, args } => {
                write_ident(f, name)?;
                f.write_char('(')?;
                write_list(f, args, ", ")?;
                f.write_char(')')
            }
            Expr::Negate(e) => {
                f.write_char('-')?;
                // `--` would start a comment
                if matches!(&**e, Expr::Literal(Literal::Num(n)) if n.starts_with('-')) {
                    write!(f, "({e})")
                } else {
                    write_nested(f, e)
                }
            }
            Expr::Binary { op, left, right } => {
                write_nested(f, left)?;
                write!(f, " {} ", op.as_str())?;
                write_nested(f, right)
            }
            Expr::Compare { op, left, right } => {
                write_nested(f, left)?;
                write!(f, " {} ", op.as_str())?;
                write_nested(f, right)
            }
            Expr::Like { negated, expr, pattern } => {
                write_nested(f, expr)?;
                write!(f, " {}LIKE ", not_kw(*negated))?;
                write_nested(f, pattern)
            }
            Expr::InList { negated, expr, list } => {
                write_nested(f, expr)?;
                write!(f, " {}IN (", not_kw(*negated))?;
                write_list(f, list, ", ")?;
                f.write_char(')')
            }
            Expr::InSubquery { negated, expr, query } => {
                write_nested(f, expr)?;
                write!(f, " {}IN ({query})", not_kw(*negated))
            }
            Expr::Between {
                negated,
                expr,
                low,
                high,
            } => {
                write_nested(f, expr)?;
                write!(f, " {}BETWEEN ", not_kw(*negated))?;
                write_nested(f, low)?;
                f.write_str(" AND ")?;
                write_nested(f, high)
            }
            Expr::IsNull { negated, expr } => {
                write_nested(f, expr)?;
                write!(f, " IS {}NULL", not_kw(*negated))
            }
            Expr::Exists { negated, query } => write!(f, "{}EXISTS ({query})", not_kw(*negated)),
            Expr::Subquery(q) => write!(f, "({q})"),
            Expr::And(items) | Expr::Or(items) => {
                let sep = if matches!(self, Expr::And(_)) { " AND " } else { " OR " };
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    match item {
                        Expr::And(_) | Expr::Or(_) => write!(f, "({item})")?,
                        _ => write!(f, "{item}")?,
                    }
                }
                Ok(())
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                write_nested(f, e)
            }
        }
    }
}

impl Display for SelectItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Wildcard => f.write_char('*'),
            SelectItem::QualifiedWildcard(q) => {
                write_ident(f, q)?;
                f.write_str(".*")
            }
            SelectItem::Expr { expr, alias } => {
                write!(f, "{expr}")?;
                if let Some(a) = alias {
                    f.write_str(" AS ")?;
                    write_ident(f, a)?;
                }
                Ok(())
            }
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.source {
            TableSource::Table(t) => write_ident(f, t)?,
            TableSource::Subquery(q) => write!(f, "({q})")?,
        }
        if let Some(a) = &self.alias {
            f.write_str(" AS ")?;
            write_ident(f, a)?;
        }
        Ok(())
    }
}

impl Display for Join {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let kw = match self.kind {
            JoinKind::Inner => "JOIN",
            JoinKind::Left => "LEFT JOIN",
            JoinKind::Right => "RIGHT JOIN",
            JoinKind::Cross => "CROSS JOIN",
        };
        write!(f, "{kw} {}", self.source)?;
        if let Some(c) = &self.condition {
            write!(f, " ON {c}")?;
        }
        Ok(())
    }
}

impl Display for OrderItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Asc => "ASC",
            Direction::Desc => "DESC",
        };
        write!(f, "{} {dir}", self.expr)
    }
}

impl SetOpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetOpKind::Union => "UNION",
            SetOpKind::UnionAll => "UNION ALL",
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

impl Display for QueryAst {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        write_list(f, &self.select, ", ")?;
        if !self.from.is_empty() {
            f.write_str(" FROM ")?;
            write_list(f, &self.from, ", ")?;
        }
        for j in &self.joins {
            write!(f, " {j}")?;
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            write_list(f, &self.group_by, ", ")?;
        }
        if let Some(h) = &self.having {
            write!(f, " HAVING {h}")?;
        }
        if let Some(op) = &self.set_op {
            return write!(f, " {} {}", op.kind.as_str(), op.right);
        }
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            write_list(f, &self.order_by, ", ")?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl QueryAst {
    /// Indented clause-per-line dump for diagnostics.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let _ = writeln!(
            out,
            "{pad}SELECT{} {}",
            if self.distinct { " DISTINCT" } else { "" },
            self.select
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        );
        if !self.from.is_empty() {
            let from: Vec<String> = self.from.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{pad}FROM {}", from.join(", "));
        }
        for j in &self.joins {
            let _ = writeln!(out, "{pad}{j}");
        }
        if let Some(w) = &self.where_clause {
            let _ = writeln!(out, "{pad}WHERE {w}");
        }
        if !self.group_by.is_empty() {
            let g: Vec<String> = self.group_by.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{pad}GROUP BY {}", g.join(", "));
        }
        if let Some(h) = &self.having {
            let _ = writeln!(out, "{pad}HAVING {h}");
        }
        if !self.order_by.is_empty() {
            let o: Vec<String> = self.order_by.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{pad}ORDER BY {}", o.join(", "));
        }
        if let Some(n) = self.limit {
            let _ = writeln!(out, "{pad}LIMIT {n}");
        }
        if let Some(op) = &self.set_op {
            let _ = writeln!(out, "{pad}{}", op.kind.as_str());
            op.right.dump_into(out, depth + 1);
        }
    }

    /// Every table source at this level, FROM list first, then joins.
    pub fn sources(&self) -> impl Iterator<Item = &TableRef> {
        self.from.iter().chain(self.joins.iter().map(|j| &j.source))
    }
}
