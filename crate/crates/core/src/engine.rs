//! Interface shared by every evaluator, plus the query wrapper used to run one.

use std::sync::Arc;

use thiserror::Error;

use crate::goal::{GoalError, GoalExpr, RelationTable};
use crate::term::{reify, State, Term, Var};

/// How many answers to collect: `run n` or `run*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    All,
    Count(usize),
}

impl Limit {
    pub fn reached(self, collected: usize) -> bool {
        match self {
            Limit::All => false,
            Limit::Count(n) => collected >= n,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Goal(#[from] GoalError),
    #[error("engine failure: {0}")]
    Internal(String),
}

/// An evaluator for goal programs.
///
/// `solve` returns answer states in the order the engine produced them.
pub trait Engine: Send + Sync {
    fn name(&self) -> String;

    fn solve(
        &self,
        goal: &GoalExpr,
        init: State,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<Vec<State>, EngineError>;
}

/// A goal over a fixed list of query variables, allocated as ids `0..n`.
#[derive(Clone, Debug)]
pub struct Query {
    pub vars: Vec<Var>,
    pub goal: GoalExpr,
}

impl Query {
    pub fn new<F>(nvars: usize, build: F) -> Query
    where
        F: FnOnce(&[Term]) -> GoalExpr,
    {
        let vars: Vec<Var> = (0..nvars as u32).map(Var).collect();
        let terms: Vec<Term> = vars.iter().map(|v| Term::Var(*v)).collect();
        Query {
            goal: build(&terms),
            vars,
        }
    }

    pub fn initial_state(&self) -> State {
        State::with_vars(self.vars.len() as u32)
    }

    pub fn solve(
        &self,
        engine: &dyn Engine,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<Vec<State>, EngineError> {
        engine.solve(&self.goal, self.initial_state(), table, limit)
    }

    /// Runs the query and reifies each answer.
    pub fn run(
        &self,
        engine: &dyn Engine,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<Vec<Term>, EngineError> {
        Ok(self
            .solve(engine, table, limit)?
            .iter()
            .map(|st| reify(st, &self.vars))
            .collect())
    }
}
