//! Random queries over the Employees/Departments pair, rendered with
//! independently varied surface syntax, plus noisy model outputs around
//! them, corpus points and small schemas.

use proptest::prelude::*;
use t2s_core::corpus::ExamplePoint;
use t2s_core::schema::{Column, DatabaseSchema, Table};

pub const EMP: &str = "Employees";
pub const DEPT: &str = "Departments";
const EMP_COLS: [&str; 4] = ["id", "name", "department", "salary"];
const OPS: [&str; 6] = ["=", "!=", "<", ">", "<=", ">="];
const WORDS: [&str; 8] = ["sales", "hr", "north", "Engineering", "alice", "bob o", "x", "Q3 plan"];

#[derive(Debug, Clone)]
pub enum Lit {
    Int(i64),
    Str(String),
}

#[derive(Debug, Clone)]
pub struct Cond {
    pub col: &'static str,
    pub op: &'static str,
    pub lit: Lit,
}

#[derive(Debug, Clone)]
pub enum Item {
    Col(&'static str),
    Agg(&'static str, &'static str),
    CountStar,
}

#[derive(Debug, Clone)]
pub struct QuerySpec {
    pub distinct: bool,
    pub items: Vec<Item>,
    pub join: bool,
    pub conds: Vec<Cond>,
    pub disjunction: bool,
    /// Adds `salary > (SELECT AVG(salary) FROM Employees)`.
    pub subquery: bool,
    pub group_by: Option<&'static str>,
    pub order_by: Option<(&'static str, bool)>,
    pub limit: Option<u32>,
}

/// Presentation choices that never change meaning.
#[derive(Debug, Clone)]
pub struct Surface {
    /// One bit per keyword occurrence: upper or lower case.
    pub case_bits: u64,
    pub alias: Option<(String, String)>,
    pub as_keyword: bool,
    /// Qualify columns in single-table queries.
    pub qualify: bool,
    /// Visiting order of the conditions (a permutation).
    pub cond_order: Vec<usize>,
    /// Per-condition: write `literal op' column`.
    pub flips: Vec<bool>,
    pub semicolon: bool,
    pub double_quotes: bool,
    pub decimal_ints: bool,
}

fn lit() -> impl Strategy<Value = Lit> {
    prop_oneof![
        (0i64..200_000).prop_map(Lit::Int),
        prop::sample::select(WORDS.to_vec()).prop_map(|w| Lit::Str(w.to_string())),
    ]
}

fn cond() -> impl Strategy<Value = Cond> {
    (
        prop::sample::select(EMP_COLS.to_vec()),
        prop::sample::select(OPS.to_vec()),
        lit(),
    )
        .prop_map(|(col, op, lit)| Cond { col, op, lit })
}

fn item() -> impl Strategy<Value = Item> {
    prop_oneof![
        3 => prop::sample::select(EMP_COLS.to_vec()).prop_map(Item::Col),
        1 => (prop::sample::select(vec!["SUM", "AVG", "MAX", "MIN", "COUNT"]), prop::sample::select(EMP_COLS.to_vec()))
            .prop_map(|(f, c)| Item::Agg(f, c)),
        1 => Just(Item::CountStar),
    ]
}

pub fn query_spec() -> impl Strategy<Value = QuerySpec> {
    (
        any::<bool>(),
        prop::collection::vec(item(), 1..4),
        any::<bool>(),
        prop::collection::vec(cond(), 0..5),
        any::<bool>(),
        prop::bool::weighted(0.2),
        prop::option::weighted(0.3, prop::sample::select(EMP_COLS.to_vec())),
        prop::option::weighted(0.4, (prop::sample::select(EMP_COLS.to_vec()), any::<bool>())),
        prop::option::weighted(0.3, 1u32..50),
    )
        .prop_map(
            |(distinct, items, join, conds, disjunction, subquery, group_by, order_by, limit)| QuerySpec {
                distinct,
                items,
                join,
                conds,
                disjunction,
                subquery,
                group_by,
                order_by,
                limit,
            },
        )
}

fn alias_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["e", "emp", "a", "x1", "staff", "zz"]).prop_map(str::to_string)
}

/// A surface for `spec`; conditions include the optional subquery one.
pub fn surface(spec: &QuerySpec) -> impl Strategy<Value = Surface> {
    let n = spec.conds.len() + usize::from(spec.subquery);
    let aliases =
        (alias_name(), prop::sample::select(vec!["d", "dep", "b", "y2"])).prop_map(|(a, b)| (a, b.to_string()));
    (
        any::<u64>(),
        prop::option::of(aliases),
        any::<bool>(),
        any::<bool>(),
        Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        prop::collection::vec(any::<bool>(), n),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(
            |(case_bits, alias, as_keyword, qualify, cond_order, flips, semicolon, double_quotes, decimal_ints)| {
                Surface {
                    case_bits,
                    alias,
                    as_keyword,
                    qualify,
                    cond_order,
                    flips,
                    semicolon,
                    double_quotes,
                    decimal_ints,
                }
            },
        )
}

/// Uppercase keywords, no aliases, conditions in source order.
pub fn plain(spec: &QuerySpec) -> Surface {
    let n = spec.conds.len() + usize::from(spec.subquery);
    Surface {
        case_bits: u64::MAX,
        alias: None,
        as_keyword: true,
        qualify: false,
        cond_order: (0..n).collect(),
        flips: vec![false; n],
        semicolon: false,
        double_quotes: false,
        decimal_ints: false,
    }
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

struct Writer<'a> {
    s: &'a Surface,
    kw_index: u32,
}

impl Writer<'_> {
    fn kw(&mut self, word: &str) -> String {
        let upper = self.s.case_bits >> (self.kw_index % 64) & 1 == 1;
        self.kw_index += 1;
        if upper {
            word.to_uppercase()
        } else {
            word.to_lowercase()
        }
    }

    fn lit(&self, l: &Lit) -> String {
        match l {
            Lit::Int(i) if self.s.decimal_ints => format!("{i}.0"),
            Lit::Int(i) => i.to_string(),
            Lit::Str(s) if self.s.double_quotes => format!("\"{s}\""),
            Lit::Str(s) => format!("'{s}'"),
        }
    }
}

/// Renders `spec` with surface `s`.
pub fn render(spec: &QuerySpec, s: &Surface) -> String {
    let mut w = Writer { s, kw_index: 0 };
    let (emp_q, dept_q) = match &s.alias {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (EMP.to_string(), DEPT.to_string()),
    };
    let col = |c: &str| -> String {
        if spec.join || (s.qualify && s.alias.is_some()) {
            format!("{emp_q}.{c}")
        } else {
            c.to_string()
        }
    };
    let mut out = w.kw("select");
    if spec.distinct {
        out.push(' ');
        out.push_str(&w.kw("distinct"));
    }
    let items: Vec<String> = spec
        .items
        .iter()
        .map(|i| match i {
            Item::Col(c) => col(c),
            Item::Agg(f, c) => format!("{}({})", w.kw(f), col(c)),
            Item::CountStar => format!("{}(*)", w.kw("count")),
        })
        .collect();
    out.push(' ');
    out.push_str(&items.join(", "));
    out.push(' ');
    out.push_str(&w.kw("from"));
    out.push(' ');
    let source = |w: &mut Writer, table: &str, alias: Option<&String>| match alias {
        Some(a) if w.s.as_keyword => format!("{table} {} {a}", w.kw("as")),
        Some(a) => format!("{table} {a}"),
        None => table.to_string(),
    };
    out.push_str(&source(&mut w, EMP, s.alias.as_ref().map(|a| &a.0)));
    if spec.join {
        let j = w.kw("join");
        let d = source(&mut w, DEPT, s.alias.as_ref().map(|a| &a.1));
        let on = w.kw("on");
        out.push_str(&format!(" {j} {d} {on} {emp_q}.department = {dept_q}.department"));
    }
    let mut conds: Vec<String> = Vec::new();
    for &i in &s.cond_order {
        let flipped = s.flips[i];
        let text = if i < spec.conds.len() {
            let c = &spec.conds[i];
            let l = w.lit(&c.lit);
            if flipped {
                format!("{l} {} {}", flip(c.op), col(c.col))
            } else {
                format!("{} {} {l}", col(c.col), c.op)
            }
        } else {
            let sub = format!(
                "({} {}({}) {} {EMP})",
                w.kw("select"),
                w.kw("avg"),
                "salary",
                w.kw("from")
            );
            if flipped {
                format!("{sub} < {}", col("salary"))
            } else {
                format!("{} > {sub}", col("salary"))
            }
        };
        conds.push(text);
    }
    if !conds.is_empty() {
        let joiner = if spec.disjunction { "or" } else { "and" };
        let mut parts = Vec::new();
        for (k, c) in conds.into_iter().enumerate() {
            if k > 0 {
                parts.push(w.kw(joiner));
            }
            parts.push(c);
        }
        out.push_str(&format!(" {} {}", w.kw("where"), parts.join(" ")));
    }
    if let Some(g) = spec.group_by {
        out.push_str(&format!(" {} {} {}", w.kw("group"), w.kw("by"), col(g)));
    }
    if let Some((o, desc)) = spec.order_by {
        out.push_str(&format!(" {} {} {}", w.kw("order"), w.kw("by"), col(o)));
        if desc {
            out.push(' ');
            out.push_str(&w.kw("desc"));
        }
    }
    if let Some(n) = spec.limit {
        out.push_str(&format!(" {} {n}", w.kw("limit")));
    }
    if s.semicolon {
        out.push(';');
    }
    out
}

pub fn spec_and_two_surfaces() -> impl Strategy<Value = (QuerySpec, Surface, Surface)> {
    query_spec().prop_flat_map(|spec| {
        let a = surface(&spec);
        let b = surface(&spec);
        (Just(spec), a, b)
    })
}

pub fn rendered_query() -> impl Strategy<Value = String> {
    query_spec()
        .prop_flat_map(|spec| {
            let s = surface(&spec);
            (Just(spec), s)
        })
        .prop_map(|(spec, s)| render(&spec, &s))
}

/// How a clean query is buried in a raw completion.
#[derive(Debug, Clone)]
pub struct Noise {
    pub echo: bool,
    pub label: usize,
    pub multiline: bool,
    pub fence: bool,
    pub chatter: Option<usize>,
    pub escaped: bool,
    pub leading: String,
    pub question: usize,
}

const LABELS: [&str; 4] = ["# Response:", "#Response:", "SQL:", "# response :"];
const CHATTER: [&str; 4] = [
    "This returns the requested rows.",
    "Let me know if you need anything else.",
    "Note: results depend on the data.",
    "The query above answers the question.",
];
const QUESTIONS: [&str; 4] = [
    "List all employees earning more than 50k.",
    "How many people work in sales?",
    "Which department has the largest budget?",
    "Give me the \"top\" earners.",
];

pub fn noise() -> impl Strategy<Value = Noise> {
    (
        any::<bool>(),
        0..LABELS.len(),
        any::<bool>(),
        any::<bool>(),
        prop::option::of(0..CHATTER.len()),
        any::<bool>(),
        prop::sample::select(vec!["", " ", "\n", "  \n\n"]).prop_map(str::to_string),
        0..QUESTIONS.len(),
    )
        .prop_map(
            |(echo, label, multiline, fence, chatter, escaped, leading, question)| Noise {
                echo,
                label,
                multiline,
                fence,
                chatter,
                escaped,
                leading,
                question,
            },
        )
}

/// Wraps `clean` (a one-line query) in the noise described by `n`.
pub fn bury(clean: &str, n: &Noise) -> String {
    let mut body = if n.multiline {
        let mut q = clean.to_string();
        for kw in [" FROM ", " from ", " WHERE ", " where ", " ORDER ", " order "] {
            q = q.replace(kw, &format!("\n{}", kw.trim_start()));
        }
        q
    } else {
        clean.to_string()
    };
    if n.fence {
        body = format!("```sql\n{body}\n```");
    }
    let mut raw = n.leading.clone();
    if n.echo {
        raw.push_str(&format!(
            "# Instruction:\n\"{}\"\n\n# Schema:\n{{'database': 'employees', 'metadata': [{{'name': 'Employees', 'columns': ['id', 'name', 'department', 'salary']}}]}}\n\n",
            QUESTIONS[n.question]
        ));
    }
    raw.push_str(LABELS[n.label]);
    raw.push('\n');
    raw.push_str(&body);
    if let Some(c) = n.chatter {
        raw.push_str("\n\n");
        raw.push_str(CHATTER[c]);
    }
    if n.escaped {
        raw = raw.replace('"', "\\\"").replace('\n', "\\n");
    }
    raw
}

pub fn point() -> impl Strategy<Value = ExamplePoint> {
    ("[a-z0-9_]{1,12}", "\\PC{1,40}", "[a-z_]{1,10}", "[ -~]{1,60}")
        .prop_filter("blank fields are rejected on load", |(_, q, _, sql)| {
            !q.trim().is_empty() && !sql.trim().is_empty()
        })
        .prop_map(|(id, q, db, sql)| ExamplePoint::new(id, q, db, sql))
}

pub fn vary_case(name: &str, bits: u64) -> String {
    name.chars()
        .enumerate()
        .map(|(i, c)| {
            if bits >> (i % 64) & 1 == 1 {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

/// A schema with case-insensitively distinct names, one table index and a
/// case variant of that table's name.
pub fn schema_and_variant() -> impl Strategy<Value = (DatabaseSchema, usize, String)> {
    let table = (
        "[A-Za-z][A-Za-z_]{0,9}",
        prop::collection::btree_set("[a-z][a-z_]{0,7}", 1..4),
    );
    prop::collection::vec(table, 1..5)
        .prop_filter_map("table names must differ ignoring case", |tables| {
            let mut seen = std::collections::HashSet::new();
            if !tables.iter().all(|(n, _)| seen.insert(n.to_ascii_lowercase())) {
                return None;
            }
            let tables: Vec<Table> = tables
                .into_iter()
                .map(|(n, cols)| Table::new(n, cols.into_iter().map(Column::new).collect()))
                .collect();
            DatabaseSchema::new("db", tables, Vec::new(), Vec::new()).ok()
        })
        .prop_flat_map(|schema| {
            let n = schema.tables.len();
            (Just(schema), 0..n, any::<u64>())
        })
        .prop_map(|(schema, pick, bits)| {
            let variant = vary_case(&schema.tables[pick].name, bits);
            (schema, pick, variant)
        })
}
