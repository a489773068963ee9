//! Few-shot example selection, prompt rendering under the five strategies,
//! input-length budgeting and the prompt cost model.
//!
//! Two layouts exist. The line layout writes each example as
//! `Instruction: ...` / `Schema: ...` / `SQL: ...` lines with a compact
//! schema. The block layout uses the labeled training-string blocks
//! (`# Instruction:`, `# Schema:`, `# Response:`) with the inline
//! dictionary schema and is preceded by the developer-persona preamble.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExamplePoint, INSTRUCTION_LABEL, RESPONSE_LABEL, SCHEMA_LABEL};
use crate::schema::{DatabaseSchema, SchemaCatalog};

pub const PREAMBLE: &str = include_str!("../assets/preamble.txt");
pub const DEFAULT_MAX_INPUT_TOKENS: usize = 512;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("prompt needs {estimate} tokens but the budget is {max} ({overflow} over)")]
    Budget {
        estimate: usize,
        max: usize,
        overflow: usize,
    },
    #[error("requested {k} examples from a corpus of {available}")]
    NotEnoughExamples { k: usize, available: usize },
    #[error("example '{id}' lacks its {component}")]
    IncompleteExample { id: String, component: &'static str },
    #[error("unknown schema '{0}'")]
    UnknownSchema(String),
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ZeroShot,
    FewShot,
    StructuredFewShot,
    SchemaAwareFewShot,
    InstructionFocusedFewShot,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ZeroShot,
        Strategy::FewShot,
        Strategy::StructuredFewShot,
        Strategy::SchemaAwareFewShot,
        Strategy::InstructionFocusedFewShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "zero_shot",
            Strategy::FewShot => "few_shot",
            Strategy::StructuredFewShot => "structured_few_shot",
            Strategy::SchemaAwareFewShot => "schema_aware_few_shot",
            Strategy::InstructionFocusedFewShot => "instruction_focused_few_shot",
        }
    }

    fn uses_blocks(self) -> bool {
        matches!(self, Strategy::StructuredFewShot | Strategy::InstructionFocusedFewShot)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s.replace('-', "_"))
            .ok_or_else(|| PromptError::UnknownStrategy(s.to_string()))
    }
}

/// The question to answer: an example point without its gold SQL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTarget {
    pub instruction: String,
    pub schema_id: String,
}

impl From<&ExamplePoint> for PromptTarget {
    fn from(p: &ExamplePoint) -> Self {
        PromptTarget {
            instruction: p.instruction.clone(),
            schema_id: p.schema_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub strategy: Strategy,
    pub examples: Vec<ExamplePoint>,
    pub target: PromptTarget,
    pub preamble: Option<String>,
    pub max_input_tokens: usize,
    /// Clarification line placed just before the target's response label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarification: Option<String>,
}

impl PromptSpec {
    /// A spec with the strategy's default preamble and the default budget.
    pub fn new(strategy: Strategy, examples: Vec<ExamplePoint>, target: PromptTarget) -> Self {
        PromptSpec {
            strategy,
            examples,
            target,
            preamble: strategy.uses_blocks().then(|| PREAMBLE.to_string()),
            max_input_tokens: DEFAULT_MAX_INPUT_TOKENS,
            clarification: None,
        }
    }

    pub fn k(&self) -> usize {
        self.examples.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub token_estimate: usize,
    pub spec: PromptSpec,
}

/// Whitespace-delimited word count.
pub fn estimate_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "seed")]
pub enum SelectionMode {
    FirstK,
    SeededRandom(u64),
    TokenOverlap,
}

fn token_set(text: &str) -> HashSet<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Jaccard similarity of lowercase whitespace token sets; two empty sets score 0.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Picks `k` illustrative examples from `corpus`.
pub fn select_examples(
    corpus: &[ExamplePoint],
    target_instruction: &str,
    k: usize,
    mode: SelectionMode,
) -> Result<Vec<ExamplePoint>, PromptError> {
    if k > corpus.len() {
        return Err(PromptError::NotEnoughExamples {
            k,
            available: corpus.len(),
        });
    }
    let chosen: Vec<ExamplePoint> = match mode {
        SelectionMode::FirstK => corpus[..k].to_vec(),
        SelectionMode::SeededRandom(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, corpus.len(), k).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| corpus[i].clone()).collect()
        }
        SelectionMode::TokenOverlap => {
            let mut scored: Vec<(usize, f64)> = corpus
                .iter()
                .enumerate()
                .map(|(i, p)| (i, jaccard(target_instruction, &p.instruction)))
                .collect();
            // Stable sort keeps corpus order among equal scores.
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));
            scored.into_iter().take(k).map(|(i, _)| corpus[i].clone()).collect()
        }
    };
    for p in &chosen {
        check_complete(p)?;
    }
    Ok(chosen)
}

fn check_complete(p: &ExamplePoint) -> Result<(), PromptError> {
    let missing = |component| PromptError::IncompleteExample {
        id: p.id.clone(),
        component,
    };
    if p.instruction.trim().is_empty() {
        return Err(missing("instruction"));
    }
    if p.schema_id.trim().is_empty() {
        return Err(missing("schema"));
    }
    if p.gold_sql.trim().is_empty() {
        return Err(missing("SQL query"));
    }
    Ok(())
}

static COMPARATOR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\bbetween\s+[^\s,.;?!]+\s+and\s+[^\s,.;?!]+|\b(?:(?:more|less|greater|fewer|higher|lower|larger|smaller|older|younger|bigger|earlier|later)\s+than|at\s+(?:least|most)|above|below|over|under|exceeding|before|after)\s+[^\s,.;?!]+|(?:>=|<=|!=|<>|>|<|=)\s*[^\s,.;?!]+",
    )
    .unwrap()
});
static AGGREGATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:(?:total|average|mean|maximum|minimum|sum\s+of|number\s+of|count\s+of)(?:\s+[^\s,.;?!]+)?|most|least|biggest|largest|smallest|highest|lowest|oldest|youngest|distinct)\b",
    )
    .unwrap()
});

/// Comparator and aggregate phrases copied verbatim from an instruction,
/// in order of appearance.
pub fn extract_constraints(instruction: &str) -> Vec<String> {
    let mut spans: Vec<(usize, usize)> = COMPARATOR
        .find_iter(instruction)
        .chain(AGGREGATE.find_iter(instruction))
        .map(|m| (m.start(), m.end()))
        .collect();
    spans.sort_unstable();
    let mut out: Vec<String> = Vec::new();
    let mut covered = 0;
    for (start, end) in spans {
        if start < covered {
            continue;
        }
        out.push(instruction[start..end].to_string());
        covered = end;
    }
    out
}

fn constraints_line(instruction: &str) -> Option<String> {
    let phrases = extract_constraints(instruction);
    (!phrases.is_empty()).then(|| format!("Constraints: {}", phrases.join("; ")))
}

fn schema_text(strategy: Strategy, schema: &DatabaseSchema) -> String {
    match strategy {
        Strategy::StructuredFewShot | Strategy::InstructionFocusedFewShot => schema.render_inline(),
        Strategy::SchemaAwareFewShot => schema.render_detailed(),
        Strategy::ZeroShot | Strategy::FewShot => schema.render_compact(),
    }
}

fn line_block(instruction: &str, schema: &str, sql: Option<&str>, clarification: Option<&str>) -> String {
    let mut out = format!("Instruction: {instruction}\nSchema: {schema}\n");
    if let Some(c) = clarification {
        out.push_str(c);
        out.push('\n');
    }
    match sql {
        Some(sql) => out.push_str(&format!("SQL: {sql}\n")),
        None => out.push_str("SQL:\n"),
    }
    out
}

fn labeled_block(
    instruction: &str,
    constraints: Option<&str>,
    schema: &str,
    sql: Option<&str>,
    clarification: Option<&str>,
) -> String {
    let mut out = format!("{INSTRUCTION_LABEL}\n\"{instruction}\"\n");
    if let Some(c) = constraints {
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&format!("\n{SCHEMA_LABEL}\n{schema}\n\n"));
    if let Some(c) = clarification {
        out.push_str(c);
        out.push_str("\n\n");
    }
    out.push_str(RESPONSE_LABEL);
    out.push('\n');
    if let Some(sql) = sql {
        out.push_str(sql);
        out.push('\n');
    }
    out
}

/// Renders with the whitespace token estimator.
pub fn render(spec: &PromptSpec, catalog: &SchemaCatalog) -> Result<RenderedPrompt, PromptError> {
    render_with_estimator(spec, catalog, &estimate_tokens)
}

/// Renders with a caller-supplied token estimator (for example a backend's
/// own tokenizer count).
pub fn render_with_estimator(
    spec: &PromptSpec,
    catalog: &SchemaCatalog,
    estimator: &dyn Fn(&str) -> usize,
) -> Result<RenderedPrompt, PromptError> {
    if spec.strategy == Strategy::ZeroShot && !spec.examples.is_empty() {
        return Err(PromptError::InvalidSpec("zero_shot takes no examples".into()));
    }
    if spec.target.instruction.trim().is_empty() {
        return Err(PromptError::InvalidSpec("target instruction is empty".into()));
    }
    let schema_of = |id: &str| {
        catalog
            .get(id)
            .ok_or_else(|| PromptError::UnknownSchema(id.to_string()))
    };
    let focused = spec.strategy == Strategy::InstructionFocusedFewShot;
    let mut blocks: Vec<String> = Vec::with_capacity(spec.k() + 1);
    for ex in &spec.examples {
        check_complete(ex)?;
        let schema = schema_text(spec.strategy, schema_of(&ex.schema_id)?);
        blocks.push(if spec.strategy.uses_blocks() {
            let constraints = if focused {
                constraints_line(&ex.instruction)
            } else {
                None
            };
            labeled_block(
                &ex.instruction,
                constraints.as_deref(),
                &schema,
                Some(&ex.gold_sql),
                None,
            )
        } else {
            line_block(&ex.instruction, &schema, Some(&ex.gold_sql), None)
        });
    }
    let target_schema = schema_text(spec.strategy, schema_of(&spec.target.schema_id)?);
    let clarification = spec.clarification.as_deref();
    blocks.push(if spec.strategy.uses_blocks() {
        let constraints = if focused {
            constraints_line(&spec.target.instruction)
        } else {
            None
        };
        labeled_block(
            &spec.target.instruction,
            constraints.as_deref(),
            &target_schema,
            None,
            clarification,
        )
    } else {
        line_block(&spec.target.instruction, &target_schema, None, clarification)
    });

    let mut text = String::new();
    if let Some(p) = &spec.preamble {
        text.push_str(p.trim_end());
        text.push_str("\n\n");
    }
    text.push_str(&blocks.join("\n"));

    let token_estimate = estimator(&text);
    if token_estimate > spec.max_input_tokens {
        return Err(PromptError::Budget {
            estimate: token_estimate,
            max: spec.max_input_tokens,
            overflow: token_estimate - spec.max_input_tokens,
        });
    }
    Ok(RenderedPrompt {
        text,
        token_estimate,
        spec: spec.clone(),
    })
}

/// Inputs of the prompt cost model. Counts are in tokens except `e`
/// (corpus size), `k` (examples) and `t` (attempts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub e: u64,
    pub k: u64,
    pub l_e: u64,
    pub l_q: u64,
    pub t: u64,
    pub l_sql: u64,
    pub layers: Option<u64>,
    pub hidden: Option<u64>,
    pub params: Option<u64>,
}

impl CostModel {
    pub fn new(e: u64, k: u64, l_e: u64, l_q: u64, t: u64) -> Self {
        CostModel {
            e,
            k,
            l_e,
            l_q,
            t: t.max(1),
            l_sql: 0,
            layers: None,
            hidden: None,
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Prompt length `k * L_e + L_q`.
    pub l: u128,
    pub per_layer_token_pair_ops: u128,
    pub total_ops_over_attempts: u128,
    pub selection_cost_class: String,
    /// `t * (L^2 + L_sql)`.
    pub inference_and_validation_ops: u128,
    /// `H * d * L^2` when both layer count and hidden size are given.
    pub full_attention_ops: Option<u128>,
}

pub fn estimate_cost(m: &CostModel) -> CostReport {
    let l = u128::from(m.k) * u128::from(m.l_e) + u128::from(m.l_q);
    let per_layer = l * l;
    let t = u128::from(m.t.max(1));
    CostReport {
        l,
        per_layer_token_pair_ops: per_layer,
        total_ops_over_attempts: t * per_layer,
        selection_cost_class: "O(E)".to_string(),
        inference_and_validation_ops: t * (per_layer + u128::from(m.l_sql)),
        full_attention_ops: match (m.layers, m.hidden) {
            (Some(h), Some(d)) => Some(u128::from(h) * u128::from(d) * per_layer),
            _ => None,
        },
    }
}

/// Short magnitude form: `2340900` → `2.3M`.
pub fn approx_magnitude(n: u128) -> String {
    let (value, suffix) = match n {
        0..=999 => return n.to_string(),
        1_000..=999_999 => (n as f64 / 1e3, "K"),
        1_000_000..=999_999_999 => (n as f64 / 1e6, "M"),
        _ => (n as f64 / 1e9, "G"),
    };
    format!("{value:.1}{suffix}")
}
