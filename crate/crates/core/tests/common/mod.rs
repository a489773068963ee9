#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod pairs;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use t2s_core::backend::{FinishReason, GenerationOutcome, ScriptedBackend, TokenLogprob};
use t2s_core::corpus::{self, ExamplePoint};
use t2s_core::eval::FixtureSet;
use t2s_core::schema::SchemaCatalog;

pub const SALES_TOTAL_MISNAMED: &str = "SELECT SUM(salary) FROM Employee WHERE dept = 'Sales';";
pub const SALES_TOTAL: &str = "SELECT SUM(salary) FROM Employees WHERE department = 'Sales';";
pub const ABOVE_50K: &str = "SELECT name FROM Employees WHERE salary > 50000;";

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn goldens() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(goldens().join(name)).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

pub fn tables_path() -> PathBuf {
    repo_root().join("fixtures/spider/tables.json")
}

pub fn train_path() -> PathBuf {
    repo_root().join("fixtures/corpus/train.jsonl")
}

pub fn dev_path() -> PathBuf {
    repo_root().join("fixtures/corpus/dev.jsonl")
}

pub fn catalog() -> Arc<SchemaCatalog> {
    static CATALOG: OnceLock<Arc<SchemaCatalog>> = OnceLock::new();
    CATALOG
        .get_or_init(|| Arc::new(SchemaCatalog::load_path(&tables_path()).expect("bundled tables.json loads")))
        .clone()
}

pub fn load(path: &Path) -> Vec<ExamplePoint> {
    corpus::load_corpus(&fs::read_to_string(path).unwrap(), &catalog()).unwrap()
}

pub fn train() -> Vec<ExamplePoint> {
    load(&train_path())
}

pub fn dev() -> Vec<ExamplePoint> {
    load(&dev_path())
}

/// Fixture databases built from the committed seeds into a scratch
/// directory, once per test binary.
pub fn fixtures() -> FixtureSet {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let src = repo_root().join("fixtures");
        for entry in fs::read_dir(&src).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            let seed = path.join(format!("{name}.sql"));
            if seed.is_file() {
                fs::create_dir_all(dir.join(&name)).unwrap();
                fs::copy(&seed, dir.join(&name).join(format!("{name}.sql"))).unwrap();
            }
        }
        t2s_core::cli::build_fixtures(&dir).expect("fixture seeds build");
        dir
    });
    FixtureSet::new(dir)
}

pub fn outcome(text: &str, logprobs: &[f64]) -> GenerationOutcome {
    GenerationOutcome {
        raw_text: text.to_string(),
        tokens: Some(
            logprobs
                .iter()
                .map(|&logprob| TokenLogprob { text: None, logprob })
                .collect(),
        ),
        finish: FinishReason::Stop,
    }
}

/// High-confidence outcome.
pub fn confident(text: &str) -> GenerationOutcome {
    outcome(text, &[-0.05, -0.1, -0.02])
}

pub fn scripted(texts: &[&str]) -> ScriptedBackend {
    ScriptedBackend::new(texts.iter().map(|t| confident(t)).collect()).unwrap()
}
