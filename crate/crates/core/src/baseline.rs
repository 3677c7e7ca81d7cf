//! Single-threaded reference evaluator.
//!
//! Streams are eager cons lists with suspended tails (`Thunk`). `mplus` swaps
//! its arguments only when the first stream is immature, which is what makes
//! two infinite streams alternate. This evaluator is the order oracle for the
//! concurrent engines.

use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use crate::engine::{Engine, EngineError, Limit};
use crate::goal::{disj_plus, GoalError, GoalExpr, RelationTable};
use crate::term::{State, Term};

// Mature prefixes of streams are built recursively; grow the stack instead of
// overflowing on long ones.
const RED_ZONE: usize = 64 * 1024;
const STACK_CHUNK: usize = 2 * 1024 * 1024;

pub enum LazyStream {
    Empty,
    Cons(State, Box<LazyStream>),
    Thunk(Box<dyn FnOnce() -> LazyStream>),
}

impl LazyStream {
    pub fn unit(st: State) -> LazyStream {
        LazyStream::Cons(st, Box::new(LazyStream::Empty))
    }
}

impl fmt::Debug for LazyStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LazyStream::Empty => f.write_str("Empty"),
            LazyStream::Cons(st, tail) => write!(f, "Cons({st:?}, {tail:?})"),
            LazyStream::Thunk(_) => f.write_str("Thunk"),
        }
    }
}

/// A goal ready to be applied to states.
pub type CompiledGoal = Rc<dyn Fn(State) -> LazyStream>;

pub fn mplus(s1: LazyStream, s2: LazyStream) -> LazyStream {
    match s1 {
        LazyStream::Empty => s2,
        LazyStream::Cons(head, tail) => {
            let rest = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || mplus(*tail, s2));
            LazyStream::Cons(head, Box::new(rest))
        }
        LazyStream::Thunk(force) => LazyStream::Thunk(Box::new(move || mplus(s2, force()))),
    }
}

pub fn bind(s: LazyStream, g: CompiledGoal) -> LazyStream {
    match s {
        LazyStream::Empty => LazyStream::Empty,
        LazyStream::Cons(head, tail) => {
            let first = g(head);
            let rest = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || bind(*tail, g));
            mplus(first, rest)
        }
        LazyStream::Thunk(force) => LazyStream::Thunk(Box::new(move || bind(force(), g))),
    }
}

/// Collects up to `limit` states, forcing thunks as it goes.
///
/// With [`Limit::All`] this does not return on a stream that stays productive
/// (or immature) forever.
pub fn take(limit: Limit, mut s: LazyStream) -> Vec<State> {
    let mut out = Vec::new();
    while !limit.reached(out.len()) {
        s = match s {
            LazyStream::Empty => break,
            LazyStream::Cons(head, tail) => {
                out.push(head);
                *tail
            }
            LazyStream::Thunk(force) => force(),
        };
    }
    out
}

/// Evaluates `expr` in `st`, after checking that every reachable relation exists.
pub fn eval(
    expr: &GoalExpr,
    st: State,
    table: &Arc<RelationTable>,
) -> Result<LazyStream, GoalError> {
    table.validate(expr)?;
    Ok(eval_goal(expr, st, table))
}

pub fn compile(expr: GoalExpr, table: Arc<RelationTable>) -> CompiledGoal {
    Rc::new(move |st| eval_goal(&expr, st, &table))
}

fn eval_goal(expr: &GoalExpr, st: State, table: &Arc<RelationTable>) -> LazyStream {
    stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || match expr {
        GoalExpr::Equalo(u, v) => match st.unify(u, v) {
            Some(next) => LazyStream::unit(next),
            None => LazyStream::Empty,
        },
        GoalExpr::Disj(a, b) => {
            let s1 = eval_goal(a, st.clone(), table);
            let s2 = eval_goal(b, st, table);
            mplus(s1, s2)
        }
        GoalExpr::Conj(a, b) | GoalExpr::ConjSce(a, b) => {
            let s = eval_goal(a, st, table);
            bind(s, compile((**b).clone(), table.clone()))
        }
        GoalExpr::DisjConc(goals) => {
            let nested = disj_plus(goals.iter().cloned()).expect("disj+c is never empty");
            eval_goal(&nested, st, table)
        }
        GoalExpr::Fresh(body) => {
            let (v, next) = st.fresh();
            eval_goal(&body(Term::Var(v)), next, table)
        }
        GoalExpr::Delay(thunk) => {
            let thunk = thunk.clone();
            let table = table.clone();
            LazyStream::Thunk(Box::new(move || eval_goal(&thunk(), st, &table)))
        }
        GoalExpr::Call(name, args) => {
            let body = table
                .resolve(*name, args)
                .unwrap_or_else(|e| panic!("unvalidated program: {e}"));
            eval_goal(&body, st, table)
        }
    })
}

/// The reference evaluator as an [`Engine`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Baseline;

impl Engine for Baseline {
    fn name(&self) -> String {
        "baseline".into()
    }

    fn solve(
        &self,
        goal: &GoalExpr,
        init: State,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<Vec<State>, EngineError> {
        let stream = eval(goal, init, table)?;
        Ok(take(limit, stream))
    }
}
