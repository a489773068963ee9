//! SQL parsing, canonicalization and schema validation.

pub mod ast;
pub mod canonical;
pub mod lexer;
pub mod parser;
pub mod validate;

pub use ast::QueryAst;
pub use canonical::{canonical_text, canonicalize, canonicalize_with};
pub use parser::{parse_sql, ParseError};
pub use validate::{
    apply_repairs, near_match, suggest_repairs, validate, validate_sql, Issue, IssueKind, Repairs, ValidationReport,
};
