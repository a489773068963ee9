//! Recursive-descent parser for the SPIDER gold-query subset.

use std::fmt;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset of the offending token.
    pub offset: usize,
    pub found: String,
    pub expected: Vec<String>,
    pub message: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}", self.offset)?;
        if let Some(m) = &self.message {
            write!(f, ": {m}")?;
        }
        if !self.expected.is_empty() {
            write!(f, ": expected {}", self.expected.join(" | "))?;
        }
        write!(f, ", found {}", self.found)
    }
}

impl std::error::Error for ParseError {}

/// Parses one statement; a trailing semicolon is optional.
pub fn parse_sql(text: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(text).map_err(|e| ParseError {
        offset: e.offset,
        found: "invalid token".into(),
        expected: Vec::new(),
        message: Some(e.message),
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        agg_depth: 0,
    };
    let q = p.query()?;
    p.eat_symbol(";");
    if !matches!(p.peek().kind, TokenKind::Eof) {
        return Err(p.error(&["end of input"]));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    agg_depth: usize,
}

type PResult<T> = Result<T, ParseError>;

const CLAUSE_END: &[&str] = &[
    "FROM",
    "WHERE",
    "GROUP",
    "HAVING",
    "ORDER",
    "LIMIT",
    "UNION",
    "INTERSECT",
    "EXCEPT",
    "JOIN",
    "ON",
    "INNER",
    "LEFT",
    "RIGHT",
    "CROSS",
];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError {
            offset: t.offset,
            found: t.kind.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message: None,
        }
    }

    fn error_msg(&self, message: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            offset: t.offset,
            found: t.kind.to_string(),
            expected: Vec::new(),
            message: Some(message.to_string()),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_keyword(kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.peek().is_symbol(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> PResult<()> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(self.error(&[sym]))
        }
    }

    fn identifier(&mut self) -> PResult<String> {
        match &self.peek().kind {
            TokenKind::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            TokenKind::QuotedIdent(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// An optional alias: `AS name` or a bare non-reserved word.
    fn alias(&mut self) -> PResult<Option<String>> {
        if self.eat_keyword("AS") {
            // SPIDER golds occasionally alias with a quoted string.
            if let TokenKind::Str(s) = &self.peek().kind {
                let s = s.clone();
                self.advance();
                return Ok(Some(s));
            }
            return self.identifier().map(Some);
        }
        match &self.peek().kind {
            TokenKind::Word(w) if !is_reserved(w) => Ok(Some(self.identifier()?)),
            TokenKind::QuotedIdent(_) => Ok(Some(self.identifier()?)),
            _ => Ok(None),
        }
    }

    fn query(&mut self) -> PResult<QueryAst> {
        if !self.at_keyword("SELECT") {
            return Err(self.error(&["SELECT"]));
        }
        self.advance();
        let mut q = QueryAst {
            distinct: if self.eat_keyword("DISTINCT") {
                true
            } else {
                self.eat_keyword("ALL");
                false
            },
            ..QueryAst::default()
        };
        q.select = self.comma_list(Self::select_item)?;

        if self.eat_keyword("FROM") {
            q.from = self.comma_list(Self::table_ref)?;
            while let Some(kind) = self.join_kind()? {
                let source = self.table_ref()?;
                let condition = if self.eat_keyword("ON") {
                    Some(self.expr()?)
                } else {
                    None
                };
                q.joins.push(Join {
                    kind,
                    source,
                    condition,
                });
            }
        }
        if self.eat_keyword("WHERE") {
            q.where_clause = Some(self.expr()?);
        }
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            q.group_by = self.comma_list(Self::expr)?;
        }
        if self.eat_keyword("HAVING") {
            q.having = Some(self.expr()?);
        }
        let set_kind = if self.eat_keyword("UNION") {
            Some(if self.eat_keyword("ALL") {
                SetOpKind::UnionAll
            } else {
                SetOpKind::Union
            })
        } else if self.eat_keyword("INTERSECT") {
            Some(SetOpKind::Intersect)
        } else if self.eat_keyword("EXCEPT") {
            Some(SetOpKind::Except)
        } else {
            None
        };
        if let Some(kind) = set_kind {
            let right = self.query()?;
            q.set_op = Some(SetOperation {
                kind,
                right: Box::new(right),
            });
            return Ok(q);
        }
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            q.order_by = self.comma_list(Self::order_item)?;
        }
        if self.eat_keyword("LIMIT") {
            match &self.peek().kind {
                TokenKind::Number(n) => {
                    let n = n.parse::<u64>().map_err(|_| self.error(&["integer"]))?;
                    self.advance();
                    q.limit = Some(n);
                }
                _ => return Err(self.error(&["integer"])),
            }
        }
        Ok(q)
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut items = vec![item(self)?];
        while self.eat_symbol(",") {
            items.push(item(self)?);
        }
        Ok(items)
    }

    fn select_item(&mut self) -> PResult<SelectItem> {
        if self.eat_symbol("*") {
            return Ok(SelectItem::Wildcard);
        }
        let qualified_star = matches!(self.peek().kind, TokenKind::Word(_) | TokenKind::QuotedIdent(_))
            && self.peek_at(1).is_symbol(".")
            && self.peek_at(2).is_symbol("*");
        if qualified_star {
            let q = self.identifier()?;
            self.advance();
            self.advance();
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> PResult<TableRef> {
        if self.eat_symbol("(") {
            let q = self.query()?;
            self.expect_symbol(")")?;
            let alias = self.alias()?;
            return Ok(TableRef {
                source: TableSource::Subquery(Box::new(q)),
                alias,
            });
        }
        let name = self.identifier()?;
        let alias = self.alias()?;
        Ok(TableRef {
            source: TableSource::Table(name),
            alias,
        })
    }

    fn join_kind(&mut self) -> PResult<Option<JoinKind>> {
        let kind = if self.eat_keyword("JOIN") {
            return Ok(Some(JoinKind::Inner));
        } else if self.eat_keyword("INNER") {
            JoinKind::Inner
        } else if self.eat_keyword("LEFT") {
            self.eat_keyword("OUTER");
            JoinKind::Left
        } else if self.eat_keyword("RIGHT") {
            self.eat_keyword("OUTER");
            JoinKind::Right
        } else if self.eat_keyword("CROSS") {
            JoinKind::Cross
        } else {
            return Ok(None);
        };
        self.expect_keyword("JOIN")?;
        Ok(Some(kind))
    }

    fn order_item(&mut self) -> PResult<OrderItem> {
        let expr = self.expr()?;
        let direction = if self.eat_keyword("DESC") {
            Direction::Desc
        } else {
            self.eat_keyword("ASC");
            Direction::Asc
        };
        Ok(OrderItem { expr, direction })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut items = vec![self.and_expr()?];
        while self.eat_keyword("OR") {
            items.push(self.and_expr()?);
        }
        Ok(flatten(items, true))
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut items = vec![self.not_expr()?];
        while self.eat_keyword("AND") {
            items.push(self.not_expr()?);
        }
        Ok(flatten(items, false))
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at_keyword("NOT") && !self.peek_at(1).is_keyword("EXISTS") {
            self.advance();
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> PResult<Expr> {
        let left = self.additive()?;
        let cmp = match &self.peek().kind {
            TokenKind::Symbol("=") => Some(CmpOp::Eq),
            TokenKind::Symbol("!=") | TokenKind::Symbol("<>") => Some(CmpOp::Ne),
            TokenKind::Symbol("<") => Some(CmpOp::Lt),
            TokenKind::Symbol(">") => Some(CmpOp::Gt),
            TokenKind::Symbol("<=") => Some(CmpOp::Le),
            TokenKind::Symbol(">=") => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = cmp {
            self.advance();
            let right = self.additive()?;
            return Ok(Expr::Compare {
                op,
                left: Box::new(left),
                right: Box::new(right),
            });
        }
        if self.eat_keyword("IS") {
            let negated = self.eat_keyword("NOT");
            self.expect_keyword("NULL")?;
            return Ok(Expr::IsNull {
                negated,
                expr: Box::new(left),
            });
        }
        let negated =
            if self.at_keyword("NOT") && ["LIKE", "IN", "BETWEEN"].iter().any(|k| self.peek_at(1).is_keyword(k)) {
                self.advance();
                true
            } else {
                false
            };
        if self.eat_keyword("LIKE") {
            let pattern = self.additive()?;
            return Ok(Expr::Like {
                negated,
                expr: Box::new(left),
                pattern: Box::new(pattern),
            });
        }
        if self.eat_keyword("IN") {
            self.expect_symbol("(")?;
            if self.at_keyword("SELECT") {
                let query = self.query()?;
                self.expect_symbol(")")?;
                return Ok(Expr::InSubquery {
                    negated,
                    expr: Box::new(left),
                    query: Box::new(query),
                });
            }
            let list = self.comma_list(Self::additive)?;
            self.expect_symbol(")")?;
            return Ok(Expr::InList {
                negated,
                expr: Box::new(left),
                list,
            });
        }
        if self.eat_keyword("BETWEEN") {
            let low = self.additive()?;
            self.expect_keyword("AND")?;
            let high = self.additive()?;
            return Ok(Expr::Between {
                negated,
                expr: Box::new(left),
                low: Box::new(low),
                high: Box::new(high),
            });
        }
        if negated {
            return Err(self.error(&["LIKE", "IN", "BETWEEN"]));
        }
        Ok(left)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match &self.peek().kind {
                TokenKind::Symbol("+") => ArithOp::Add,
                TokenKind::Symbol("-") => ArithOp::Sub,
                TokenKind::Symbol("||") => ArithOp::Concat,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::Binary {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut left = self.unary()?;
        loop {
            let op = match &self.peek().kind {
                TokenKind::Symbol("*") => ArithOp::Mul,
                TokenKind::Symbol("/") => ArithOp::Div,
                TokenKind::Symbol("%") => ArithOp::Mod,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::Binary {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek().is_symbol("-") {
            if let TokenKind::Number(n) = &self.peek_at(1).kind {
                let n = format!("-{n}");
                self.advance();
                self.advance();
                return Ok(Expr::Literal(Literal::Num(n)));
            }
            self.advance();
            return Ok(Expr::Negate(Box::new(self.unary()?)));
        }
        if self.peek().is_symbol("+") {
            self.advance();
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Num(n.clone())))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s.clone())))
            }
            TokenKind::Symbol("(") => {
                self.advance();
                if self.at_keyword("SELECT") {
                    let q = self.query()?;
                    self.expect_symbol(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_symbol(")")?;
                Ok(e)
            }
            TokenKind::Word(w) if w.eq_ignore_ascii_case("NULL") => {
                self.advance();
                Ok(Expr::Literal(Literal::Null))
            }
            TokenKind::Word(w) if w.eq_ignore_ascii_case("EXISTS") || w.eq_ignore_ascii_case("NOT") => {
                let negated = self.eat_keyword("NOT");
                self.expect_keyword("EXISTS")?;
                self.expect_symbol("(")?;
                let q = self.query()?;
                self.expect_symbol(")")?;
                Ok(Expr::Exists {
                    negated,
                    query: Box::new(q),
                })
            }
            TokenKind::Word(w) if self.peek_at(1).is_symbol("(") && !is_reserved(w) => {
                let name = w.clone();
                self.advance();
                self.advance();
                match AggFunc::from_name(&name) {
                    Some(func) => self.aggregate(func),
                    None => {
                        let args = if self.peek().is_symbol(")") {
                            Vec::new()
                        } else {
                            self.comma_list(Self::expr)?
                        };
                        self.expect_symbol(")")?;
                        Ok(Expr::Function { name, args })
                    }
                }
            }
            TokenKind::Word(w) if !is_reserved(w) => self.column(),
            TokenKind::QuotedIdent(_) => self.column(),
            _ => {
                let mut expected = vec!["expression"];
                if CLAUSE_END.iter().any(|k| tok.is_keyword(k)) {
                    expected = vec!["expression before clause keyword"];
                }
                Err(self.error(&expected))
            }
        }
    }

    fn aggregate(&mut self, func: AggFunc) -> PResult<Expr> {
        if self.agg_depth > 0 {
            return Err(self.error_msg("nested aggregate"));
        }
        let distinct = self.eat_keyword("DISTINCT");
        let arg = if self.eat_symbol("*") {
            Expr::Star
        } else {
            self.agg_depth += 1;
            let e = self.expr();
            self.agg_depth -= 1;
            e?
        };
        self.expect_symbol(")")?;
        Ok(Expr::Aggregate {
            func,
            distinct,
            arg: Box::new(arg),
        })
    }

    fn column(&mut self) -> PResult<Expr> {
        let first = self.identifier()?;
        if self.peek().is_symbol(".") {
            self.advance();
            let name = self.identifier()?;
            return Ok(Expr::Column(ColumnName {
                qualifier: Some(first),
                name,
            }));
        }
        Ok(Expr::Column(ColumnName {
            qualifier: None,
            name: first,
        }))
    }
}

/// Builds an n-ary AND/OR, absorbing nested nodes of the same kind.
pub(crate) fn flatten(items: Vec<Expr>, or: bool) -> Expr {
    if items.len() == 1 {
        return items.into_iter().next().unwrap();
    }
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item {
            Expr::Or(inner) if or => out.extend(inner),
            Expr::And(inner) if !or => out.extend(inner),
            other => out.push(other),
        }
    }
    if or {
        Expr::Or(out)
    } else {
        Expr::And(out)
    }
}
