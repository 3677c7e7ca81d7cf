//! Front end for the kanren engines: the s-expression query language, a
//! driver with a wall-clock limit, engine diffing, and the benchmark harness.

pub mod bench;
pub mod compile;
pub mod exec;
pub mod syntax;

use kanren_core::rel::standard_relations;

pub use compile::{compile, Program};
pub use exec::{build_engine, compare, execute, DiffMode, EngineKind, Outcome, Verdict};
pub use syntax::{parse, Script, SyntaxError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Goal(#[from] kanren_core::GoalError),
}

/// Parses and compiles `src` against the standard library relations.
pub fn load(src: &str) -> Result<Program, LoadError> {
    let script = parse(src, &standard_relations())?;
    Ok(compile(&script, standard_relations())?)
}
