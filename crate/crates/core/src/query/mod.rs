//! A read-only Cypher subset:
//!
//! ```text
//! query   := "MATCH" pattern ("WHERE" pred)? "RETURN" ident
//! pattern := (ident "=")? node (rel node)*
//! node    := "(" ident? (":" ident)? ")"
//! rel     := "<-" body "-" | "-" body "->" | "-" body "-"
//! body    := ("[" ident? (":" TYPE)? ("*" (INT | INT? ".." INT?)?)? "]")?
//! pred    := cmp (("AND" | "OR") cmp)*        AND binds tighter
//! cmp     := ident "." ident ("=" | "<>") literal | ident ("=" | "<>") ident
//! ```
//!
//! Matching is relationship-isomorphic: an edge appears at most once per
//! match, while nodes may repeat. Labels resolve ontology inheritance.

mod ast;
mod eval;
mod parser;

pub use ast::{CmpOp, Comparison, Direction, Length, NodePattern, Predicate, QueryAst, RelPattern};
pub use eval::{evaluate, explain, property_value, EvalOptions, Expansion, MatchResult, Plan, DEFAULT_STAR_MAX};
pub use parser::parse_query;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unbound variable `{name}` at byte {offset}")]
    UnboundVariable { name: String, offset: usize },
    #[error("relationship variable `{name}` at byte {offset} cannot be referenced")]
    RelationshipVariable { name: String, offset: usize },
    #[error("path variable `{name}` at byte {offset} cannot be used in WHERE")]
    PathInPredicate { name: String, offset: usize },
    #[error("variable `{0}` is bound twice with different roles")]
    Conflict(String),
}
