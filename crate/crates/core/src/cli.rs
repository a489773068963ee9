//! Command-line front end. `run` parses arguments, executes one subcommand
//! and maps failures to exit codes: 1 usage or configuration, 2 data,
//! 3 backend transport.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::backend::{Backend, HttpBackend, ScriptedBackend};
use crate::corpus::{self, ExamplePoint};
use crate::eval::{self, EmOptions, EvalOptions, FixtureSet, ReportFormat};
use crate::pipeline::{self, PromptTemplate, RefinementPolicy, RunContext, RunRecord, RunTarget};
use crate::prompt::{self, CostModel, PromptSpec, PromptTarget, SelectionMode, Strategy};
use crate::schema::SchemaCatalog;
use crate::sql::validate::{apply_repairs, suggest_repairs};
use crate::sql::validate_sql;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_TRANSPORT: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Transport(_) => EXIT_TRANSPORT,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "t2s", version, about = "Text-to-SQL prompting, refinement and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a question/SQL dataset and write JSONL plus native schemas.
    Prepare(PrepareArgs),
    /// Render one prompt and print it.
    Render(RenderArgs),
    /// Run the refinement loop over a target file and write run records.
    Generate(GenerateArgs),
    /// Score run records against gold queries.
    Evaluate(EvaluateArgs),
    /// Check one query against a schema.
    Validate(ValidateArgs),
    /// Evaluate the prompt cost model.
    Cost(CostArgs),
    /// Database fixture maintenance.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Dataset file (JSONL or JSON array) or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Schema file (SPIDER tables.json or native) or directory.
    #[arg(long)]
    pub schemas: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Fraction kept for the example set; the rest is held out.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail on the first malformed record.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    FirstK,
    SeededRandom,
    TokenOverlap,
}

impl SelectionArg {
    fn mode(self, seed: u64) -> SelectionMode {
        match self {
            SelectionArg::FirstK => SelectionMode::FirstK,
            SelectionArg::SeededRandom => SelectionMode::SeededRandom(seed),
            SelectionArg::TokenOverlap => SelectionMode::TokenOverlap,
        }
    }
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, default_value = "fixtures/spider/tables.json")]
    pub schemas: PathBuf,
    /// Example set used for few-shot selection.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "few_shot")]
    pub strategy: String,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "first-k")]
    pub selection: SelectionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = prompt::DEFAULT_MAX_INPUT_TOKENS)]
    pub max_input_tokens: usize,
    /// Drop the developer-persona preamble from block layouts.
    #[arg(long)]
    pub no_preamble: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub prompt: PromptArgs,
    #[arg(long)]
    pub question: String,
    #[arg(long)]
    pub db: String,
    /// Use exactly these corpus examples, in this order, instead of selecting.
    #[arg(long, value_delimiter = ',')]
    pub example_ids: Vec<String>,
    #[arg(long)]
    pub clarification: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Questions to answer (gold SQL, if present, is ignored).
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "http")]
    pub backend: BackendKind,
    /// Mock script: an array replayed for every target, or an object keyed
    /// by target id (`*` as fallback).
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub backend_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub threshold: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 2)]
    pub clarify_from: u32,
    #[arg(long, default_value_t = 3)]
    pub extra_example_from: u32,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub temperature_bump: f64,
    #[arg(long, default_value_t = 256)]
    pub max_output_tokens: u32,
    #[arg(long)]
    pub stop: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Store full prompt text in each attempt.
    #[arg(long)]
    pub verbose_prompts: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Run records; not needed with --self-check.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, default_value = "fixtures")]
    pub fixtures: PathBuf,
    /// Schemas used to bind unqualified columns during EM.
    #[arg(long)]
    pub schemas: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "table")]
    pub format: Vec<String>,
    /// Write `report.<ext>` files here instead of printing them.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub ignore_literals: bool,
    #[arg(long, default_value_t = eval::DEFAULT_FLOAT_TOL)]
    pub float_tol: f64,
    /// Score every gold query against itself.
    #[arg(long)]
    pub self_check: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = "fixtures/spider/tables.json")]
    pub schemas: PathBuf,
    #[arg(long)]
    pub db: String,
    #[arg(long)]
    pub sql: String,
    /// Also print the repaired query and the clarification directive.
    #[arg(long)]
    pub repair: bool,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Corpus size.
    #[arg(long = "E")]
    pub e: u64,
    #[arg(long)]
    pub k: u64,
    /// Tokens per example.
    #[arg(long = "Le")]
    pub l_e: u64,
    /// Tokens in the target question.
    #[arg(long = "Lq")]
    pub l_q: u64,
    /// Attempts.
    #[arg(long, default_value_t = 1)]
    pub t: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Build `<db>/<db>.sqlite` from each `<db>/<db>.sql` seed.
    Build {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command, writing
/// regular output to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> CliResult<u8> {
    match command {
        Command::Prepare(a) => cmd_prepare(a, out),
        Command::Render(a) => cmd_render(a, out),
        Command::Generate(a) => cmd_generate(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Cost(a) => cmd_cost(a, out),
        Command::Fixtures(FixturesCommand::Build { dir }) => cmd_fixtures_build(&dir, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("writing output: {e}")))
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load_catalog(path: &Path) -> CliResult<SchemaCatalog> {
    require(path, "schema path")?;
    SchemaCatalog::load_path(path).map_err(data("loading schemas"))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn load_points(path: &Path, catalog: &SchemaCatalog) -> CliResult<Vec<ExamplePoint>> {
    require(path, "corpus")?;
    corpus::load_corpus(&read(path)?, catalog).map_err(data(&path.display().to_string()))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn parse_strategy(s: &str) -> CliResult<Strategy> {
    s.parse()
        .map_err(|e: prompt::PromptError| CliError::Usage(e.to_string()))
}

fn dataset_files(input: &Path) -> CliResult<Vec<PathBuf>> {
    require(input, "input")?;
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(io_err(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "jsonl"))
        // SPIDER ships its schemas next to the question files.
        .filter(|p| p.file_name().is_some_and(|n| n != "tables.json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no dataset files in {}", input.display())));
    }
    Ok(files)
}

pub fn cmd_prepare(a: PrepareArgs, out: &mut dyn Write) -> CliResult<u8> {
    let catalog = load_catalog(&a.schemas)?;
    let files = dataset_files(&a.input)?;
    let mut points = Vec::new();
    let mut malformed = Vec::new();
    for f in &files {
        let records = corpus::parse_records(&read(f)?).map_err(data(&f.display().to_string()))?;
        for (i, r) in records.into_iter().enumerate() {
            let problem = match r {
                Ok(mut p) => {
                    if catalog.get(&p.schema_id).is_none() {
                        Some(format!("unknown schema '{}'", p.schema_id))
                    } else {
                        p.instruction = corpus::preprocess(&p.instruction);
                        if p.instruction.is_empty() {
                            Some("question is empty after preprocessing".into())
                        } else {
                            points.push(p);
                            None
                        }
                    }
                }
                Err(e) => Some(e.to_string()),
            };
            if let Some(m) = problem {
                let line = format!("{}: record {i}: {m}", f.display());
                if a.strict {
                    return Err(CliError::Data(line));
                }
                malformed.push(line);
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Data("no usable records in input".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &points {
        *counts.entry(p.schema_id.as_str()).or_default() += 1;
    }
    let outputs: Vec<(&str, Vec<ExamplePoint>)> = match a.split {
        None => vec![("corpus.jsonl", points.clone())],
        Some(fraction) => {
            let (train, held) =
                corpus::split_corpus(&points, a.seed, fraction).map_err(|e| CliError::Usage(e.to_string()))?;
            vec![("train.jsonl", train), ("heldout.jsonl", held)]
        }
    };
    for (name, pts) in &outputs {
        write_file(&a.out_dir.join(name), &corpus::serialize_corpus(pts))?;
    }
    let used: Vec<&str> = counts.keys().copied().collect();
    for db in &used {
        let s = catalog.get(db).expect("counted schemas are in the catalog");
        write_file(
            &a.out_dir.join("schemas").join(format!("{db}.json")),
            &s.to_native_json(),
        )?;
    }
    let mut report = String::new();
    for (name, pts) in &outputs {
        report.push_str(&format!("{name}: {}\n", pts.len()));
    }
    for (db, n) in &counts {
        report.push_str(&format!("  {db}: {n}\n"));
    }
    report.push_str(&format!("malformed: {}\n", malformed.len()));
    for m in &malformed {
        report.push_str(&format!("  {m}\n"));
    }
    emit(out, &report)?;
    Ok(EXIT_OK)
}

fn template(p: &PromptArgs) -> CliResult<PromptTemplate> {
    let strategy = parse_strategy(&p.strategy)?;
    let mut t = PromptTemplate::new(strategy, p.k, p.selection.mode(p.seed));
    t.max_input_tokens = p.max_input_tokens;
    if p.no_preamble {
        t.preamble = None;
    }
    Ok(t)
}

pub fn cmd_render(a: RenderArgs, out: &mut dyn Write) -> CliResult<u8> {
    let catalog = load_catalog(&a.prompt.schemas)?;
    let t = template(&a.prompt)?;
    let corpus = match &a.prompt.corpus {
        Some(p) => load_points(p, &catalog)?,
        None => Vec::new(),
    };
    let examples = if !a.example_ids.is_empty() {
        a.example_ids
            .iter()
            .map(|id| {
                corpus
                    .iter()
                    .find(|p| &p.id == id)
                    .cloned()
                    .ok_or_else(|| CliError::Data(format!("no example with id '{id}'")))
            })
            .collect::<CliResult<Vec<_>>>()?
    } else {
        prompt::select_examples(&corpus, &a.question, t.k, t.selection).map_err(|e| CliError::Data(e.to_string()))?
    };
    let spec = PromptSpec {
        strategy: t.strategy,
        examples,
        target: PromptTarget {
            instruction: a.question,
            schema_id: a.db,
        },
        preamble: t.preamble,
        max_input_tokens: t.max_input_tokens,
        clarification: a.clarification,
    };
    let rendered = prompt::render(&spec, &catalog).map_err(|e| CliError::Data(e.to_string()))?;
    emit(out, &rendered.text)?;
    Ok(EXIT_OK)
}

/// Turns a mock script document into one backend per target.
fn mock_backends(script: &Path, targets: &[RunTarget]) -> CliResult<Vec<Arc<dyn Backend>>> {
    require(script, "script")?;
    let doc: serde_json::Value = serde_json::from_str(&read(script)?).map_err(data("script"))?;
    let build = |v: &serde_json::Value| -> CliResult<Arc<dyn Backend>> {
        let b = ScriptedBackend::from_value(v.clone()).map_err(data("script"))?;
        Ok(Arc::new(b))
    };
    match &doc {
        serde_json::Value::Array(_) => targets.iter().map(|_| build(&doc)).collect(),
        serde_json::Value::Object(map) => targets
            .iter()
            .map(|t| {
                let entry = map
                    .get(&t.id)
                    .or_else(|| map.get("*"))
                    .ok_or_else(|| CliError::Data(format!("script has no entry for target '{}'", t.id)))?;
                build(entry)
            })
            .collect(),
        _ => Err(CliError::Data("script must be a JSON array or object".into())),
    }
}

pub fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> CliResult<u8> {
    // Configuration problems surface before any file is read.
    let http = match a.backend {
        BackendKind::Http => {
            let b = HttpBackend::from_env(a.backend_url.as_deref(), Duration::from_secs(a.timeout_secs))
                .map_err(|e| CliError::Usage(e.to_string()))?
                .with_model(a.model.clone());
            Some(Arc::new(b) as Arc<dyn Backend>)
        }
        BackendKind::Mock => {
            if a.script.is_none() {
                return Err(CliError::Usage("--backend mock needs --script".into()));
            }
            None
        }
    };
    require(&a.targets, "targets")?;
    let catalog = Arc::new(load_catalog(&a.prompt.schemas)?);
    let t = template(&a.prompt)?;
    let corpus = match &a.prompt.corpus {
        Some(p) => load_points(p, &catalog)?,
        None if t.k == 0 => Vec::new(),
        None => return Err(CliError::Usage(format!("{} with k={} needs --corpus", t.strategy, t.k))),
    };
    let targets: Vec<RunTarget> = load_points(&a.targets, &catalog)?.iter().map(RunTarget::from).collect();
    let policy = RefinementPolicy {
        threshold: a.threshold,
        max_attempts: a.max_attempts,
        clarify_from_attempt: a.clarify_from,
        extra_example_from_attempt: a.extra_example_from,
        temperature_bump: a.temperature_bump,
    };
    let mut ctx = RunContext::new(catalog, Arc::new(corpus), t, policy).map_err(|e| CliError::Usage(e.to_string()))?;
    ctx.generation.temperature = a.temperature;
    ctx.generation.max_output_tokens = a.max_output_tokens;
    ctx.generation.stop_sequences = a.stop.clone();
    ctx.verbose_prompts = a.verbose_prompts;

    let backends: Vec<Arc<dyn Backend>> = match (&http, &a.script) {
        (Some(b), _) => vec![b.clone(); targets.len()],
        (None, Some(script)) => mock_backends(script, &targets)?,
        (None, None) => unreachable!("checked above"),
    };
    let (records, summary) = pipeline::run_batch(&targets, &ctx, |i| backends[i].clone(), a.parallelism)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).map_err(data("serializing record"))?);
        lines.push('\n');
    }
    write_file(&a.out, &lines)?;
    let hist: Vec<String> = summary
        .attempt_histogram
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect();
    emit(
        out,
        &format!(
            "records {}  accepted {}  exhausted {}  aborted {}\nattempts {}\n",
            summary.total,
            summary.accepted,
            summary.exhausted,
            summary.aborted,
            hist.join(" ")
        ),
    )?;
    let transport = pipeline::BatchSummary::transport_aborts(&records);
    if transport > 0 {
        eprintln!("error: {transport} run(s) aborted by backend transport failures");
        return Ok(EXIT_TRANSPORT);
    }
    let scripted = pipeline::BatchSummary::aborts_of(&records, pipeline::AbortKind::Script);
    if scripted > 0 {
        eprintln!("error: {scripted} run(s) aborted by the mock script");
        return Ok(EXIT_DATA);
    }
    Ok(EXIT_OK)
}

fn load_records(path: &Path) -> CliResult<Vec<RunRecord>> {
    require(path, "records")?;
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Data(format!("records line {}: {e}", i + 1))))
        .collect()
}

pub fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CliResult<u8> {
    require(&a.gold, "gold file")?;
    require(&a.fixtures, "fixtures dir")?;
    let formats: Vec<ReportFormat> = a
        .format
        .iter()
        .map(|f| f.parse().map_err(|e: eval::EvalError| CliError::Usage(e.to_string())))
        .collect::<CliResult<_>>()?;
    let catalog = match &a.schemas {
        Some(p) => Some(load_catalog(p)?),
        None => None,
    };
    let golds = eval::load_golds(&read(&a.gold)?).map_err(data("gold"))?;
    let fixtures = FixtureSet::new(&a.fixtures);
    let opts = EvalOptions {
        em: EmOptions {
            ignore_literals: a.ignore_literals,
        },
        float_tol: a.float_tol,
    };
    let report = if a.self_check {
        eval::self_check(&golds, &fixtures, catalog.as_ref(), &opts)
    } else {
        let path = a
            .records
            .as_ref()
            .ok_or_else(|| CliError::Usage("--records is required unless --self-check is given".into()))?;
        let records = load_records(path)?;
        eval::evaluate_run(&records, &golds, &fixtures, catalog.as_ref(), &opts)
    }
    .map_err(|e| CliError::Data(e.to_string()))?;
    for f in formats {
        let doc = eval::emit_report(&report, f).map_err(|e| CliError::Data(e.to_string()))?;
        match &a.out_dir {
            Some(dir) => write_file(&dir.join(format!("report.{}", f.extension())), &doc)?,
            None => emit(out, &doc)?,
        }
    }
    if a.out_dir.is_some() {
        emit(out, &format!("{}\n", eval::report::headline(&report)))?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(a: ValidateArgs, out: &mut dyn Write) -> CliResult<u8> {
    let catalog = load_catalog(&a.schemas)?;
    let schema = catalog
        .get(&a.db)
        .ok_or_else(|| CliError::Usage(format!("unknown database '{}'", a.db)))?;
    let report = validate_sql(&a.sql, schema);
    let mut text = String::new();
    if report.aligned {
        text.push_str("aligned\n");
    } else if !report.syntax_ok {
        text.push_str(&format!(
            "syntax error: {}\n",
            report.syntax_error.as_deref().unwrap_or("unknown")
        ));
    } else {
        for i in &report.issues {
            text.push_str(&format!("{i}\n"));
        }
        if a.repair {
            let repairs = suggest_repairs(&report, schema);
            text.push_str(&format!("repaired: {}\n", apply_repairs(&a.sql, &repairs)));
            text.push_str(&format!("directive: {}\n", repairs.directive));
        }
    }
    emit(out, &text)?;
    Ok(if report.aligned { EXIT_OK } else { EXIT_DATA })
}

pub fn cmd_cost(a: CostArgs, out: &mut dyn Write) -> CliResult<u8> {
    if a.k > a.e {
        return Err(CliError::Usage(format!(
            "k ({}) exceeds the corpus size E ({})",
            a.k, a.e
        )));
    }
    let report = prompt::estimate_cost(&CostModel::new(a.e, a.k, a.l_e, a.l_q, a.t));
    let text = if a.json {
        let mut s = serde_json::to_string_pretty(&report).map_err(data("cost report"))?;
        s.push('\n');
        s
    } else {
        format!(
            "L={}\nops\u{2248}{}/layer ({})\nover {} attempt(s): {}\nselection {}\n",
            report.l,
            prompt::approx_magnitude(report.per_layer_token_pair_ops),
            report.per_layer_token_pair_ops,
            a.t,
            report.total_ops_over_attempts,
            report.selection_cost_class
        )
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

/// Rebuilds every fixture database from its SQL seed.
pub fn build_fixtures(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    require(dir, "fixtures dir")?;
    let mut seeds: HashMap<String, PathBuf> = HashMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        let seed = path.join(format!("{name}.sql"));
        if path.is_dir() && seed.is_file() {
            seeds.insert(name, seed);
        }
    }
    let mut names: Vec<&String> = seeds.keys().collect();
    names.sort();
    let mut built = Vec::new();
    for name in names {
        let seed = &seeds[name];
        let target = dir.join(name).join(format!("{name}.sqlite"));
        let tmp = target.with_extension("sqlite.tmp");
        if tmp.exists() {
            fs::remove_file(&tmp).map_err(io_err(&tmp))?;
        }
        let sql = read(seed)?;
        let conn = rusqlite::Connection::open(&tmp).map_err(data(&tmp.display().to_string()))?;
        conn.execute_batch(&sql).map_err(data(&seed.display().to_string()))?;
        conn.close().map_err(|(_, e)| CliError::Data(e.to_string()))?;
        fs::rename(&tmp, &target).map_err(io_err(&target))?;
        built.push(target);
    }
    Ok(built)
}

pub fn cmd_fixtures_build(dir: &Path, out: &mut dyn Write) -> CliResult<u8> {
    let built = build_fixtures(dir)?;
    if built.is_empty() {
        return Err(CliError::Data(format!(
            "no <db>/<db>.sql seeds under {}",
            dir.display()
        )));
    }
    let mut text = String::new();
    for p in &built {
        text.push_str(&format!("built {}\n", p.display()));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

/// Convenience for tests and the binary: run with a fresh stdout handle.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let code = run(args, &mut lock);
    let _ = lock.flush();
    code
}
