//! Confidence-gated generate, extract, validate loop with prompt
//! augmentation on retry.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, BackendError, FinishReason, GenerationOutcome, GenerationRequest};
use crate::corpus::ExamplePoint;
use crate::extract::extract_sql;
use crate::prompt::{jaccard, render, select_examples, PromptError, PromptSpec, PromptTarget, SelectionMode, Strategy};
use crate::schema::SchemaCatalog;
use crate::sql::validate::suggest_repairs;
use crate::sql::{validate_sql, ValidationReport};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    /// Mean token log-probability, at most 0.
    pub value: f64,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("no tokens to score")]
    NoTokens,
    #[error("backend supplied no log-probabilities")]
    Absent,
    #[error("logprob {0} is not a finite value <= 0")]
    OutOfRange(String),
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Arithmetic mean carried out in double-double precision, so the result
/// is the exact mean of the inputs rounded once.
pub fn mean_logprob(values: &[f64]) -> Result<f64, ScoreError> {
    if values.is_empty() {
        return Err(ScoreError::NoTokens);
    }
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &v in values {
        if !(v.is_finite() && v <= 0.0) {
            return Err(ScoreError::OutOfRange(v.to_string()));
        }
        let (s, e) = two_sum(hi, v);
        let (h, l) = two_sum(s, e + lo);
        hi = h;
        lo = l;
    }
    let n = values.len() as f64;
    let q1 = hi / n;
    let p = q1 * n;
    let p_err = q1.mul_add(n, -p);
    let r = ((hi - p) - p_err) + lo;
    let mean = q1 + r / n;
    // -0.0 reads badly in reports.
    Ok(if mean == 0.0 { 0.0 } else { mean })
}

pub fn score_confidence(outcome: &GenerationOutcome) -> Result<ConfidenceScore, ScoreError> {
    let logprobs = outcome.logprobs().ok_or(ScoreError::Absent)?;
    Ok(ConfidenceScore {
        value: mean_logprob(&logprobs)?,
        token_count: logprobs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPolicy {
    /// Minimum mean logprob for acceptance.
    pub threshold: f64,
    pub max_attempts: u32,
    /// First attempt that carries the clarification directive.
    pub clarify_from_attempt: u32,
    /// First attempt that gets one extra example per retry.
    pub extra_example_from_attempt: u32,
    /// Added to the sampling temperature on every retry.
    pub temperature_bump: f64,
}

impl Default for RefinementPolicy {
    fn default() -> Self {
        RefinementPolicy {
            threshold: -1.0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            clarify_from_attempt: 2,
            extra_example_from_attempt: 3,
            temperature_bump: 0.0,
        }
    }
}

impl RefinementPolicy {
    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Policy(m));
        if self.threshold.is_nan() {
            return bad("threshold is NaN".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.clarify_from_attempt == 0 || self.extra_example_from_attempt == 0 {
            return bad("attempt numbers start at 1".into());
        }
        if self.clarify_from_attempt > self.extra_example_from_attempt {
            return bad(format!(
                "clarify_from_attempt ({}) must not exceed extra_example_from_attempt ({})",
                self.clarify_from_attempt, self.extra_example_from_attempt
            ));
        }
        if !(self.temperature_bump.is_finite() && self.temperature_bump >= 0.0) {
            return bad("temperature_bump must be a finite value >= 0".into());
        }
        Ok(())
    }
}

/// How the first prompt of a run is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub strategy: Strategy,
    pub k: usize,
    pub selection: SelectionMode,
    pub preamble: Option<String>,
    pub max_input_tokens: usize,
}

impl PromptTemplate {
    pub fn new(strategy: Strategy, k: usize, selection: SelectionMode) -> Self {
        let defaults = PromptSpec::new(
            strategy,
            Vec::new(),
            PromptTarget {
                instruction: String::new(),
                schema_id: String::new(),
            },
        );
        PromptTemplate {
            strategy,
            k: if strategy == Strategy::ZeroShot { 0 } else { k },
            selection,
            preamble: defaults.preamble,
            max_input_tokens: defaults.max_input_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            max_output_tokens: 256,
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid refinement policy: {0}")]
    Policy(String),
    #[error("parallelism must be at least 1")]
    Parallelism,
}

/// Immutable inputs shared by every run of a batch.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub catalog: Arc<SchemaCatalog>,
    pub corpus: Arc<Vec<ExamplePoint>>,
    pub template: PromptTemplate,
    pub policy: RefinementPolicy,
    pub generation: GenerationSettings,
    /// Keep full prompt text in each attempt, not only its digest.
    pub verbose_prompts: bool,
}

impl RunContext {
    pub fn new(
        catalog: Arc<SchemaCatalog>,
        corpus: Arc<Vec<ExamplePoint>>,
        template: PromptTemplate,
        policy: RefinementPolicy,
    ) -> Result<Self, PipelineError> {
        policy.check()?;
        Ok(RunContext {
            catalog,
            corpus,
            template,
            policy,
            generation: GenerationSettings::default(),
            verbose_prompts: false,
        })
    }
}

/// A question to answer. Carries no gold SQL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTarget {
    pub id: String,
    pub instruction: String,
    pub schema_id: String,
}

impl From<&ExamplePoint> for RunTarget {
    fn from(p: &ExamplePoint) -> Self {
        RunTarget {
            id: p.id.clone(),
            instruction: p.instruction.clone(),
            schema_id: p.schema_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub prompt_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
    pub temperature: f64,
    pub raw_text: String,
    pub finish: FinishReason,
    pub extracted_sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_error: Option<String>,
    pub backslashes_removed: usize,
    pub validation: Option<ValidationReport>,
    pub confidence: Option<ConfidenceScore>,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Accepted,
    Exhausted,
    /// Stopped early by a backend or prompt failure; see `error`.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortKind {
    Transport,
    Prompt,
    /// A scripted backend ran dry or held a bad entry.
    Script,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunError {
    pub kind: AbortKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub schema_id: String,
    pub attempts: Vec<AttemptRecord>,
    pub final_sql: Option<String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RunError>,
}

impl RunRecord {
    pub fn accepted_attempt(&self) -> Option<u32> {
        self.attempts.iter().find(|a| a.accepted).map(|a| a.attempt)
    }
}

pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Picks the corpus example most similar to the target that is not yet in
/// the prompt and whose gold query uses only canonical schema names.
fn extra_example(ctx: &RunContext, target: &RunTarget, current: &[ExamplePoint]) -> Option<ExamplePoint> {
    let mut scored: Vec<(f64, &ExamplePoint)> = ctx
        .corpus
        .iter()
        .filter(|p| p.id != target.id && !current.iter().any(|c| c.id == p.id))
        .map(|p| (jaccard(&target.instruction, &p.instruction), p))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored
        .into_iter()
        .map(|(_, p)| p)
        .find(|p| {
            ctx.catalog
                .get(&p.schema_id)
                .is_some_and(|s| validate_sql(&p.gold_sql, s).aligned)
        })
        .cloned()
}

fn abort(record: &mut RunRecord, kind: AbortKind, message: String) {
    log::warn!("run {} aborted: {message}", record.id);
    record.status = RunStatus::Aborted;
    record.error = Some(RunError { kind, message });
}

/// Runs the refinement loop for one target.
pub fn run_one(target: &RunTarget, ctx: &RunContext, backend: &dyn Backend) -> RunRecord {
    let mut record = RunRecord {
        id: target.id.clone(),
        schema_id: target.schema_id.clone(),
        attempts: Vec::new(),
        final_sql: None,
        status: RunStatus::Exhausted,
        error: None,
    };
    let Some(schema) = ctx.catalog.get(&target.schema_id).cloned() else {
        abort(
            &mut record,
            AbortKind::Prompt,
            PromptError::UnknownSchema(target.schema_id.clone()).to_string(),
        );
        return record;
    };
    let pool: Vec<ExamplePoint> = ctx.corpus.iter().filter(|p| p.id != target.id).cloned().collect();
    let examples = match select_examples(&pool, &target.instruction, ctx.template.k, ctx.template.selection) {
        Ok(e) => e,
        Err(e) => {
            abort(&mut record, AbortKind::Prompt, e.to_string());
            return record;
        }
    };
    let mut spec = PromptSpec {
        strategy: ctx.template.strategy,
        examples,
        target: PromptTarget {
            instruction: target.instruction.clone(),
            schema_id: target.schema_id.clone(),
        },
        preamble: ctx.template.preamble.clone(),
        max_input_tokens: ctx.template.max_input_tokens,
        clarification: None,
    };
    let policy = &ctx.policy;
    let mut last_report: Option<ValidationReport> = None;

    for n in 1..=policy.max_attempts {
        if n > 1 && n >= policy.clarify_from_attempt {
            let report = last_report
                .clone()
                .unwrap_or_else(|| ValidationReport::syntax_failure(""));
            spec.clarification = Some(suggest_repairs(&report, &schema).directive);
        }
        // Zero-shot prompts take no examples, so only the directive applies.
        if n > 1 && n >= policy.extra_example_from_attempt && spec.strategy != Strategy::ZeroShot {
            match extra_example(ctx, target, &spec.examples) {
                Some(p) => spec.examples.push(p),
                None => log::debug!("run {}: no further example to add at attempt {n}", target.id),
            }
        }
        let prompt = match render(&spec, &ctx.catalog) {
            Ok(p) => p,
            Err(e) => {
                abort(&mut record, AbortKind::Prompt, format!("attempt {n}: {e}"));
                return record;
            }
        };
        let temperature = ctx.generation.temperature + policy.temperature_bump * f64::from(n - 1);
        let request = GenerationRequest {
            prompt: prompt.text.clone(),
            max_output_tokens: ctx.generation.max_output_tokens,
            temperature,
            stop_sequences: ctx.generation.stop_sequences.clone(),
        };
        let outcome = match backend.generate(&request) {
            Ok(o) => o,
            Err(e) => {
                let kind = match e {
                    BackendError::InvalidRequest(_) | BackendError::Config(_) => AbortKind::Prompt,
                    BackendError::Script(_) | BackendError::ScriptExhausted => AbortKind::Script,
                    _ => AbortKind::Transport,
                };
                abort(&mut record, kind, format!("attempt {n}: {e}"));
                return record;
            }
        };

        let mut attempt = AttemptRecord {
            attempt: n,
            prompt_digest: digest(&prompt.text),
            prompt_text: ctx.verbose_prompts.then(|| prompt.text.clone()),
            temperature,
            raw_text: outcome.raw_text.clone(),
            finish: outcome.finish,
            extracted_sql: None,
            extraction_error: None,
            backslashes_removed: 0,
            validation: None,
            confidence: None,
            accepted: false,
            rejection: None,
        };
        // An empty token list (error outcomes) counts as unavailable.
        attempt.confidence = score_confidence(&outcome).ok();

        if outcome.finish == FinishReason::Error {
            attempt.rejection = Some("backend reported a generation error".into());
            last_report = None;
        } else {
            match extract_sql(&outcome.raw_text) {
                Err(e) => {
                    attempt.extraction_error = Some(e.to_string());
                    attempt.rejection = Some("extraction failed".into());
                    last_report = None;
                }
                Ok(ex) => {
                    let report = validate_sql(&ex.sql, &schema);
                    attempt.backslashes_removed = ex.backslashes_removed;
                    attempt.extracted_sql = Some(ex.sql);
                    let confident = attempt.confidence.as_ref().is_none_or(|c| c.value >= policy.threshold);
                    if !report.aligned {
                        attempt.rejection = Some(if report.syntax_ok {
                            let issues: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
                            format!("schema misalignment: {}", issues.join("; "))
                        } else {
                            "syntax error".into()
                        });
                    } else if !confident {
                        attempt.rejection = Some("confidence below threshold".into());
                    } else {
                        attempt.accepted = true;
                    }
                    attempt.validation = Some(report.clone());
                    last_report = Some(report);
                }
            }
        }

        let accepted = attempt.accepted;
        log::debug!(
            "run {} attempt {n}: {}",
            target.id,
            attempt.rejection.as_deref().unwrap_or("accepted")
        );
        record.attempts.push(attempt);
        if accepted {
            record.final_sql = record.attempts.last().and_then(|a| a.extracted_sql.clone());
            record.status = RunStatus::Accepted;
            return record;
        }
    }
    record
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub accepted: usize,
    pub exhausted: usize,
    pub aborted: usize,
    /// Attempts used per run, mapped to the number of runs.
    pub attempt_histogram: BTreeMap<u32, usize>,
}

impl BatchSummary {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut s = BatchSummary {
            total: records.len(),
            ..Default::default()
        };
        for r in records {
            match r.status {
                RunStatus::Accepted => s.accepted += 1,
                RunStatus::Exhausted => s.exhausted += 1,
                RunStatus::Aborted => s.aborted += 1,
            }
            *s.attempt_histogram.entry(r.attempts.len() as u32).or_default() += 1;
        }
        s
    }

    pub fn transport_aborts(records: &[RunRecord]) -> usize {
        Self::aborts_of(records, AbortKind::Transport)
    }

    pub fn aborts_of(records: &[RunRecord], kind: AbortKind) -> usize {
        records
            .iter()
            .filter(|r| r.error.as_ref().is_some_and(|e| e.kind == kind))
            .count()
    }
}

/// Runs every target, at most `parallelism` at a time. Records come back
/// in target order. `backend_for` receives the target index.
pub fn run_batch<F>(
    targets: &[RunTarget],
    ctx: &RunContext,
    backend_for: F,
    parallelism: usize,
) -> Result<(Vec<RunRecord>, BatchSummary), PipelineError>
where
    F: Fn(usize) -> Arc<dyn Backend> + Sync,
{
    if parallelism == 0 {
        return Err(PipelineError::Parallelism);
    }
    ctx.policy.check()?;
    let work = |(i, t): (usize, &RunTarget)| run_one(t, ctx, backend_for(i).as_ref());
    let records: Vec<RunRecord> = if parallelism == 1 {
        targets.iter().enumerate().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|_| PipelineError::Parallelism)?;
        pool.install(|| targets.par_iter().enumerate().map(work).collect())
    };
    let summary = BatchSummary::from_records(&records);
    Ok((records, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_three() {
        assert_eq!(mean_logprob(&[-0.1, -0.3, -0.2]).unwrap(), -0.2);
        assert_eq!(mean_logprob(&[0.0]).unwrap(), 0.0);
        assert_eq!(mean_logprob(&[]).unwrap_err().to_string(), "no tokens to score");
        assert!(mean_logprob(&[0.5]).is_err());
    }

    #[test]
    fn policy_checks() {
        assert!(RefinementPolicy::default().check().is_ok());
        let p = RefinementPolicy {
            clarify_from_attempt: 4,
            ..Default::default()
        };
        assert!(p.check().is_err());
        let p = RefinementPolicy {
            max_attempts: 0,
            ..Default::default()
        };
        assert!(p.check().is_err());
    }

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
