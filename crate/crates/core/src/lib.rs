//! Core of a miniKanren implementation: terms and unification, a persistent
//! AVL substitution, engine-agnostic goal programs, the reference interleaving
//! evaluator, and a small relation library.

pub mod baseline;
pub mod engine;
pub mod goal;
pub mod rel;
pub mod subst;
pub mod term;

pub use baseline::Baseline;
pub use engine::{Engine, EngineError, Limit, Query};
pub use goal::{GoalError, GoalExpr, RelationTable};
pub use subst::Subst;
pub use term::{reify, unify, walk, Atom, State, Symbol, Term, Var};
