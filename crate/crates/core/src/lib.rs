//! Text-to-SQL orchestration and evaluation harness.

pub mod backend;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod extract;
pub mod pipeline;
pub mod prompt;
pub mod schema;
pub mod sql;
