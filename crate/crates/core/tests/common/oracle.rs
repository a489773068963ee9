//! Reference comparator for exact set match, written without the crate's
//! lexer, parser or canonicalizer. It works on raw token lists: aliases are
//! replaced by table names, clauses are cut at top-level keywords, and
//! order-free parts are matched by trying every pairing.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(String),
    Str(String),
    Sym(String),
    Group(Vec<Tok>),
}

fn lex(sql: &str) -> Vec<Tok> {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' || c == '"' {
            let mut s = String::new();
            i += 1;
            while i < chars.len() {
                if chars[i] == c {
                    if chars.get(i + 1) == Some(&c) {
                        s.push(c);
                        i += 2;
                        continue;
                    }
                    break;
                }
                s.push(chars[i]);
                i += 1;
            }
            i += 1;
            out.push(Tok::Str(s));
        } else if c == '`' || c == '[' {
            let close = if c == '`' { '`' } else { ']' };
            let mut s = String::new();
            i += 1;
            while i < chars.len() && chars[i] != close {
                s.push(chars[i]);
                i += 1;
            }
            i += 1;
            out.push(Tok::Word(s.to_lowercase()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().unwrap_or(f64::NAN);
            out.push(Tok::Num(format!("{v}")));
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Word(chars[start..i].iter().collect::<String>().to_lowercase()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = match two.as_str() {
                "<=" | ">=" | "!=" => {
                    i += 2;
                    two
                }
                "<>" => {
                    i += 2;
                    "!=".to_string()
                }
                _ => {
                    i += 1;
                    c.to_string()
                }
            };
            out.push(Tok::Sym(sym));
        }
    }
    out
}

/// Folds parentheses into nested groups.
fn group(tokens: Vec<Tok>) -> Vec<Tok> {
    let mut stack: Vec<Vec<Tok>> = vec![Vec::new()];
    for t in tokens {
        match &t {
            Tok::Sym(s) if s == "(" => stack.push(Vec::new()),
            Tok::Sym(s) if s == ")" && stack.len() > 1 => {
                let inner = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Tok::Group(inner));
            }
            _ => stack.last_mut().unwrap().push(t),
        }
    }
    while stack.len() > 1 {
        let inner = stack.pop().unwrap();
        stack.last_mut().unwrap().push(Tok::Group(inner));
    }
    stack.pop().unwrap()
}

fn is_word(t: &Tok, w: &str) -> bool {
    matches!(t, Tok::Word(x) if x == w)
}

fn is_subquery(g: &[Tok]) -> bool {
    g.first().is_some_and(|t| is_word(t, "select"))
}

const STOP: &[&str] = &[
    "join",
    "inner",
    "left",
    "right",
    "outer",
    "cross",
    "natural",
    "on",
    "where",
    "group",
    "order",
    "limit",
    "having",
    "union",
    "intersect",
    "except",
];

fn render(tokens: &[Tok]) -> String {
    tokens.iter().map(render_tok).collect::<Vec<_>>().join(" ")
}

fn render_tok(t: &Tok) -> String {
    match t {
        Tok::Word(w) => w.clone(),
        Tok::Num(n) => n.clone(),
        Tok::Str(s) => format!("'{s}'"),
        Tok::Sym(s) => s.clone(),
        Tok::Group(g) if is_subquery(g) => {
            let mut q = Query::from_tokens(g.clone());
            q.filters.sort();
            format!("({q:?})")
        }
        Tok::Group(g) => format!("({})", render(g)),
    }
}

fn split_top(tokens: &[Tok], sep: impl Fn(&Tok) -> bool) -> Vec<Vec<Tok>> {
    let mut parts = vec![Vec::new()];
    for t in tokens {
        if sep(t) {
            parts.push(Vec::new());
        } else {
            parts.last_mut().unwrap().push(t.clone());
        }
    }
    parts
}

fn flip(op: &str) -> &str {
    match op {
        "<" => ">",
        ">" => "<",
        "<=" => ">=",
        ">=" => "<=",
        other => other,
    }
}

fn is_constant(t: &Tok) -> bool {
    match t {
        Tok::Num(_) | Tok::Str(_) => true,
        Tok::Group(g) => is_subquery(g),
        _ => false,
    }
}

/// `constant op expr` becomes `expr op' constant`, where scalar subqueries
/// count as constants; IN lists are sorted.
fn normalize_predicate(mut p: Vec<Tok>) -> String {
    if p.len() >= 3 && is_constant(&p[0]) && !is_constant(&p[2]) {
        if let Tok::Sym(op) = p[1].clone() {
            if ["=", "!=", "<", ">", "<=", ">="].contains(&op.as_str()) {
                let lit = p.remove(0);
                let op = flip(&op).to_string();
                p.remove(0);
                p.push(Tok::Sym(op));
                p.push(lit);
            }
        }
    }
    for i in 1..p.len() {
        if is_word(&p[i - 1], "in") {
            if let Tok::Group(g) = &p[i] {
                if !is_subquery(g) {
                    let mut items: Vec<String> = split_top(g, |t| t == &Tok::Sym(",".into()))
                        .iter()
                        .map(|x| render(x))
                        .collect();
                    items.sort();
                    p[i] = Tok::Word(format!("[{}]", items.join(",")));
                }
            }
        }
    }
    // Equalities between two columns are symmetric.
    if p.len() == 7 && p[3] == Tok::Sym("=".into()) {
        let (l, r) = (render(&p[..3]), render(&p[4..]));
        return if l <= r {
            format!("{l} = {r}")
        } else {
            format!("{r} = {l}")
        };
    }
    render(&p)
}

fn replace_qualifiers(tokens: &mut Vec<Tok>, aliases: &[(String, String)], single: bool) {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut t = tokens[i].clone();
        if let Tok::Group(g) = &mut t {
            if !is_subquery(g) {
                replace_qualifiers(g, aliases, single);
            }
        }
        let qualified = tokens.get(i + 1) == Some(&Tok::Sym(".".into()));
        match (&t, qualified) {
            (Tok::Word(q), true) => {
                if !single {
                    let table = aliases.iter().find(|(a, _)| a == q).map(|(_, t)| t.clone());
                    out.push(Tok::Word(table.unwrap_or_else(|| q.clone())));
                    out.push(Tok::Sym(".".into()));
                }
                i += 2;
            }
            _ => {
                out.push(t);
                i += 1;
            }
        }
    }
    *tokens = out;
}

#[derive(Debug, Clone, PartialEq)]
struct Query {
    distinct: bool,
    select: Vec<String>,
    tables: Vec<String>,
    join_conds: Vec<String>,
    conjunction: bool,
    filters: Vec<String>,
    group_by: Vec<String>,
    having: String,
    order_by: String,
    limit: String,
    set_op: Option<(String, Box<Query>)>,
}

const CLAUSES: &[&str] = &["select", "from", "where", "group", "having", "order", "limit"];

impl Query {
    fn from_tokens(mut tokens: Vec<Tok>) -> Query {
        while tokens.last() == Some(&Tok::Sym(";".into())) {
            tokens.pop();
        }
        let set_at = tokens
            .iter()
            .position(|t| is_word(t, "union") || is_word(t, "intersect") || is_word(t, "except"));
        let set_op = set_at.map(|i| {
            let mut kind = render_tok(&tokens[i]);
            let mut rest = tokens[i + 1..].to_vec();
            if rest.first().is_some_and(|t| is_word(t, "all")) {
                kind.push_str(" all");
                rest.remove(0);
            }
            (kind, Box::new(Query::from_tokens(rest)))
        });
        if let Some(i) = set_at {
            tokens.truncate(i);
        }

        // FROM: collect sources and aliases first.
        let mut clauses: Vec<(String, Vec<Tok>)> = Vec::new();
        for t in tokens {
            match &t {
                Tok::Word(w) if CLAUSES.contains(&w.as_str()) => clauses.push((w.clone(), Vec::new())),
                _ => {
                    if let Some(last) = clauses.last_mut() {
                        if !(last.1.is_empty() && (is_word(&t, "by"))) {
                            last.1.push(t);
                        }
                    }
                }
            }
        }
        let clause = |name: &str| -> Vec<Tok> {
            clauses
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, c)| c.clone())
                .unwrap_or_default()
        };
        let from = clause("from");
        let mut tables = Vec::new();
        let mut aliases: Vec<(String, String)> = Vec::new();
        let mut keep: Vec<Tok> = Vec::new();
        let mut i = 0;
        let mut expect_table = true;
        while i < from.len() {
            let t = &from[i];
            if expect_table {
                if let Tok::Word(name) = t {
                    tables.push(name.clone());
                    let mut j = i + 1;
                    if from.get(j).is_some_and(|x| is_word(x, "as")) {
                        j += 1;
                    }
                    if let Some(Tok::Word(a)) = from.get(j) {
                        if !STOP.contains(&a.as_str()) {
                            aliases.push((a.clone(), name.clone()));
                            i = j;
                        }
                    }
                    expect_table = false;
                }
                i += 1;
                continue;
            }
            if is_word(t, "join") || t == &Tok::Sym(",".into()) {
                expect_table = true;
            } else if !["inner", "on"].iter().any(|w| is_word(t, w)) {
                keep.push(t.clone());
            } else if is_word(t, "on") {
                keep.push(Tok::Word("and".into()));
            }
            i += 1;
        }
        let single = tables.len() == 1;
        replace_qualifiers(&mut keep, &aliases, single);
        let mut join_conds: Vec<String> = split_top(&keep, |t| is_word(t, "and"))
            .into_iter()
            .filter(|p| !p.is_empty())
            .map(normalize_predicate)
            .collect();
        join_conds.sort();
        tables.sort();

        let fix = |mut c: Vec<Tok>| {
            replace_qualifiers(&mut c, &aliases, single);
            c
        };
        let mut select = fix(clause("select"));
        let distinct = select.first().is_some_and(|t| is_word(t, "distinct"));
        if distinct {
            select.remove(0);
        }
        let mut select: Vec<String> = split_top(&select, |t| t == &Tok::Sym(",".into()))
            .iter()
            .map(|p| render(p))
            .collect();
        select.sort();

        let filter = fix(clause("where"));
        let conjunction = !filter.iter().any(|t| is_word(t, "or"));
        let joiner = if conjunction { "and" } else { "or" };
        let filters: Vec<String> = if filter.is_empty() {
            Vec::new()
        } else {
            split_top(&filter, |t| is_word(t, joiner))
                .into_iter()
                .map(normalize_predicate)
                .collect()
        };

        let mut group_by: Vec<String> = split_top(&fix(clause("group")), |t| t == &Tok::Sym(",".into()))
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| render(p))
            .collect();
        group_by.sort();
        let having = normalize_predicate(fix(clause("having")));
        let mut order = fix(clause("order"));
        order.retain(|t| !is_word(t, "asc"));
        Query {
            distinct,
            select,
            tables,
            join_conds,
            conjunction,
            filters,
            group_by,
            having,
            order_by: render(&order),
            limit: render(&clause("limit")),
            set_op,
        }
    }

    fn matches(&self, other: &Query) -> bool {
        let same_sets = self.distinct == other.distinct
            && self.select == other.select
            && self.tables == other.tables
            && self.join_conds == other.join_conds
            && self.group_by == other.group_by
            && self.having == other.having
            && self.order_by == other.order_by
            && self.limit == other.limit;
        let filters = self.filters.len() == other.filters.len()
            && (self.filters.len() < 2 || self.conjunction == other.conjunction)
            && any_pairing(&self.filters, &other.filters, &mut vec![false; other.filters.len()]);
        let set = match (&self.set_op, &other.set_op) {
            (None, None) => true,
            (Some((a, qa)), Some((b, qb))) => a == b && qa.matches(qb),
            _ => false,
        };
        same_sets && filters && set
    }
}

/// Exhaustive search for a one-to-one pairing of equal items.
fn any_pairing(a: &[String], b: &[String], used: &mut Vec<bool>) -> bool {
    let Some((first, rest)) = a.split_first() else {
        return true;
    };
    for j in 0..b.len() {
        if !used[j] && &b[j] == first {
            used[j] = true;
            if any_pairing(rest, b, used) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

/// Whether `pred` and `gold` agree clause by clause.
pub fn oracle_match(pred: &str, gold: &str) -> bool {
    let p = Query::from_tokens(group(lex(pred)));
    let g = Query::from_tokens(group(lex(gold)));
    p.matches(&g)
}
