//! Engine-agnostic goal programs.
//!
//! Goals are plain data so that the same program can be handed to every
//! evaluator. Variable introduction and delayed goals are host functions
//! (`Fresh` receives the new variable, `Delay` rebuilds its goal on demand).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Symbol, Term, Var};

pub type FreshBody = Arc<dyn Fn(Term) -> GoalExpr + Send + Sync>;
pub type DelayThunk = Arc<dyn Fn() -> GoalExpr + Send + Sync>;
pub type RelationBody = Arc<dyn Fn(&[Term]) -> GoalExpr + Send + Sync>;

#[derive(Clone)]
pub enum GoalExpr {
    Equalo(Term, Term),
    Conj(Arc<GoalExpr>, Arc<GoalExpr>),
    Disj(Arc<GoalExpr>, Arc<GoalExpr>),
    /// n-ary concurrent disjunction; never empty.
    DisjConc(Arc<[GoalExpr]>),
    /// Conjunction that races a probe of its second goal.
    ConjSce(Arc<GoalExpr>, Arc<GoalExpr>),
    Fresh(FreshBody),
    Delay(DelayThunk),
    Call(Symbol, Arc<[Term]>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GoalError {
    #[error("disjunction needs at least one goal")]
    EmptyDisjunction,
    #[error("relation `{0}` is already defined")]
    DuplicateRelation(String),
    #[error("relation `{0}` calls itself outside of a delay")]
    UnguardedRecursion(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{name}` takes {expected} arguments, called with {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

pub fn equalo(u: impl Into<Term>, v: impl Into<Term>) -> GoalExpr {
    GoalExpr::Equalo(u.into(), v.into())
}

pub fn conj(a: GoalExpr, b: GoalExpr) -> GoalExpr {
    GoalExpr::Conj(Arc::new(a), Arc::new(b))
}

pub fn disj(a: GoalExpr, b: GoalExpr) -> GoalExpr {
    GoalExpr::Disj(Arc::new(a), Arc::new(b))
}

pub fn conj_sce(a: GoalExpr, b: GoalExpr) -> GoalExpr {
    GoalExpr::ConjSce(Arc::new(a), Arc::new(b))
}

pub fn fresh<F>(body: F) -> GoalExpr
where
    F: Fn(Term) -> GoalExpr + Send + Sync + 'static,
{
    GoalExpr::Fresh(Arc::new(body))
}

pub fn delay<F>(thunk: F) -> GoalExpr
where
    F: Fn() -> GoalExpr + Send + Sync + 'static,
{
    GoalExpr::Delay(Arc::new(thunk))
}

pub fn call(name: &str, args: impl Into<Vec<Term>>) -> GoalExpr {
    GoalExpr::Call(Symbol::intern(name), args.into().into())
}

/// Right-nested binary disjunction: `[a, b, c]` becomes `Disj(a, Disj(b, c))`.
pub fn disj_plus(goals: impl IntoIterator<Item = GoalExpr>) -> Result<GoalExpr, GoalError> {
    let mut goals: Vec<GoalExpr> = goals.into_iter().collect();
    let mut acc = goals.pop().ok_or(GoalError::EmptyDisjunction)?;
    while let Some(g) = goals.pop() {
        acc = disj(g, acc);
    }
    Ok(acc)
}

/// Right-nested binary conjunction; the empty conjunction always succeeds.
pub fn conj_plus(goals: impl IntoIterator<Item = GoalExpr>) -> GoalExpr {
    let mut goals: Vec<GoalExpr> = goals.into_iter().collect();
    let Some(mut acc) = goals.pop() else {
        return succeed();
    };
    while let Some(g) = goals.pop() {
        acc = conj(g, acc);
    }
    acc
}

pub fn disj_conc(goals: impl IntoIterator<Item = GoalExpr>) -> Result<GoalExpr, GoalError> {
    let goals: Vec<GoalExpr> = goals.into_iter().collect();
    if goals.is_empty() {
        return Err(GoalError::EmptyDisjunction);
    }
    Ok(GoalExpr::DisjConc(goals.into()))
}

pub fn succeed() -> GoalExpr {
    equalo(Term::Nil, Term::Nil)
}

pub fn fail() -> GoalExpr {
    equalo(0, 1)
}

/// Introduces `n` fresh variables at once.
pub fn fresh_n<F>(n: usize, body: F) -> GoalExpr
where
    F: Fn(&[Term]) -> GoalExpr + Send + Sync + 'static,
{
    fn go(
        n: usize,
        acc: Vec<Term>,
        body: Arc<dyn Fn(&[Term]) -> GoalExpr + Send + Sync>,
    ) -> GoalExpr {
        if acc.len() == n {
            return body(&acc);
        }
        fresh(move |v| {
            let mut acc = acc.clone();
            acc.push(v);
            go(n, acc, body.clone())
        })
    }
    go(n, Vec::with_capacity(n), Arc::new(body))
}

impl fmt::Debug for GoalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalExpr::Equalo(u, v) => write!(f, "(equalo {u} {v})"),
            GoalExpr::Conj(a, b) => write!(f, "(conj {a:?} {b:?})"),
            GoalExpr::Disj(a, b) => write!(f, "(disj {a:?} {b:?})"),
            GoalExpr::ConjSce(a, b) => write!(f, "(conj-sce {a:?} {b:?})"),
            GoalExpr::DisjConc(gs) => {
                f.write_str("(disj+c")?;
                for g in gs.iter() {
                    write!(f, " {g:?}")?;
                }
                f.write_str(")")
            }
            GoalExpr::Fresh(_) => f.write_str("(fresh <fn>)"),
            GoalExpr::Delay(_) => f.write_str("(delay <fn>)"),
            GoalExpr::Call(name, args) => {
                write!(f, "({name}")?;
                for a in args.iter() {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone)]
pub struct Relation {
    pub arity: usize,
    pub body: RelationBody,
}

/// Named relations available to `Call` goals.
#[derive(Clone, Default)]
pub struct RelationTable {
    relations: HashMap<Symbol, Relation>,
}

// Placeholder variables used to instantiate bodies during static checks.
const PROBE_BASE: u32 = u32::MAX / 2;

fn probe_args(arity: usize) -> Vec<Term> {
    (0..arity)
        .map(|i| Term::Var(Var(PROBE_BASE + i as u32)))
        .collect()
}

impl RelationTable {
    pub fn new() -> RelationTable {
        RelationTable::default()
    }

    /// Registers a relation. Bodies that call themselves must do so under a `Delay`.
    pub fn define<F>(&mut self, name: &str, arity: usize, body: F) -> Result<(), GoalError>
    where
        F: Fn(&[Term]) -> GoalExpr + Send + Sync + 'static,
    {
        let sym = Symbol::intern(name);
        if self.relations.contains_key(&sym) {
            return Err(GoalError::DuplicateRelation(name.to_string()));
        }
        let instance = body(&probe_args(arity));
        if calls_unguarded(&instance, sym, PROBE_BASE + arity as u32) {
            return Err(GoalError::UnguardedRecursion(name.to_string()));
        }
        self.relations.insert(
            sym,
            Relation {
                arity,
                body: Arc::new(body),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: Symbol) -> Option<&Relation> {
        self.relations.get(&name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relations.contains_key(&Symbol::intern(name))
    }

    pub fn names(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.relations.keys().copied()
    }

    /// Instantiates relation `name` with `args`.
    pub fn resolve(&self, name: Symbol, args: &[Term]) -> Result<GoalExpr, GoalError> {
        let rel = self
            .relations
            .get(&name)
            .ok_or_else(|| GoalError::UnknownRelation(name.to_string()))?;
        if rel.arity != args.len() {
            return Err(GoalError::ArityMismatch {
                name: name.to_string(),
                expected: rel.arity,
                found: args.len(),
            });
        }
        Ok((rel.body)(args))
    }

    /// Checks that every relation reachable from `goal` exists with the right arity.
    ///
    /// Delayed goals are expanded a bounded number of levels deep; relation
    /// bodies are each checked once.
    pub fn validate(&self, goal: &GoalExpr) -> Result<(), GoalError> {
        let mut seen = HashSet::new();
        let mut next_probe = PROBE_BASE;
        self.validate_at(goal, 0, &mut seen, &mut next_probe)
    }

    fn validate_at(
        &self,
        goal: &GoalExpr,
        delays: usize,
        seen: &mut HashSet<Symbol>,
        next_probe: &mut u32,
    ) -> Result<(), GoalError> {
        const MAX_DELAY_DEPTH: usize = 16;
        match goal {
            GoalExpr::Equalo(..) => Ok(()),
            GoalExpr::Conj(a, b) | GoalExpr::Disj(a, b) | GoalExpr::ConjSce(a, b) => {
                self.validate_at(a, delays, seen, next_probe)?;
                self.validate_at(b, delays, seen, next_probe)
            }
            GoalExpr::DisjConc(gs) => {
                if gs.is_empty() {
                    return Err(GoalError::EmptyDisjunction);
                }
                gs.iter()
                    .try_for_each(|g| self.validate_at(g, delays, seen, next_probe))
            }
            GoalExpr::Fresh(body) => {
                *next_probe = next_probe.wrapping_add(1);
                let g = body(Term::Var(Var(*next_probe)));
                self.validate_at(&g, delays, seen, next_probe)
            }
            GoalExpr::Delay(thunk) => {
                if delays >= MAX_DELAY_DEPTH {
                    return Ok(());
                }
                self.validate_at(&thunk(), delays + 1, seen, next_probe)
            }
            GoalExpr::Call(name, args) => {
                let body = self.resolve(*name, args)?;
                if seen.insert(*name) {
                    self.validate_at(&body, delays, seen, next_probe)?;
                }
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

fn calls_unguarded(goal: &GoalExpr, name: Symbol, probe: u32) -> bool {
    match goal {
        GoalExpr::Equalo(..) | GoalExpr::Delay(_) => false,
        GoalExpr::Conj(a, b) | GoalExpr::Disj(a, b) | GoalExpr::ConjSce(a, b) => {
            calls_unguarded(a, name, probe) || calls_unguarded(b, name, probe)
        }
        GoalExpr::DisjConc(gs) => gs.iter().any(|g| calls_unguarded(g, name, probe)),
        GoalExpr::Fresh(body) => calls_unguarded(&body(Term::Var(Var(probe))), name, probe + 1),
        GoalExpr::Call(callee, _) => *callee == name,
    }
}

impl fmt::Debug for RelationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<String> = self
            .relations
            .iter()
            .map(|(k, r)| format!("{k}/{}", r.arity))
            .collect();
        names.sort();
        f.debug_set().entries(names).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fives_table() -> RelationTable {
        let mut t = RelationTable::new();
        t.define("fives", 1, |a| {
            let x = a[0].clone();
            disj(
                equalo(x.clone(), 5),
                delay(move || call("fives", [x.clone()])),
            )
        })
        .unwrap();
        t
    }

    #[test]
    fn guarded_recursion_is_accepted() {
        let t = fives_table();
        assert!(t.contains("fives"));
        t.validate(&call("fives", [Term::var(0)])).unwrap();
    }

    #[test]
    fn unguarded_recursion_is_rejected() {
        let mut t = RelationTable::new();
        let err = t
            .define("loop", 1, |a| call("loop", [a[0].clone()]))
            .unwrap_err();
        assert_eq!(err, GoalError::UnguardedRecursion("loop".into()));
        assert!(!t.contains("loop"));
    }

    #[test]
    fn recursion_hidden_under_fresh_is_rejected() {
        let mut t = RelationTable::new();
        let err = t
            .define("loopo", 1, |a| {
                let x = a[0].clone();
                fresh(move |y| conj(equalo(y.clone(), x.clone()), call("loopo", [y])))
            })
            .unwrap_err();
        assert_eq!(err, GoalError::UnguardedRecursion("loopo".into()));
    }

    #[test]
    fn duplicate_definition_is_rejected() {
        let mut t = fives_table();
        let err = t.define("fives", 1, |_| succeed()).unwrap_err();
        assert_eq!(err, GoalError::DuplicateRelation("fives".into()));
    }

    #[test]
    fn disj_plus_shapes() {
        assert!(matches!(disj_plus([]), Err(GoalError::EmptyDisjunction)));
        let single = disj_plus([equalo(Term::var(0), 1)]).unwrap();
        assert_eq!(format!("{single:?}"), "(equalo #0 1)");
        let three = disj_plus([
            equalo(Term::var(0), 1),
            equalo(Term::var(0), 2),
            equalo(Term::var(0), 3),
        ])
        .unwrap();
        assert_eq!(
            format!("{three:?}"),
            "(disj (equalo #0 1) (disj (equalo #0 2) (equalo #0 3)))"
        );
    }

    #[test]
    fn disj_conc_needs_a_goal() {
        assert_eq!(disj_conc([]).unwrap_err(), GoalError::EmptyDisjunction);
        assert!(disj_conc([succeed()]).is_ok());
    }

    #[test]
    fn validate_reports_unknown_and_arity() {
        let t = fives_table();
        assert_eq!(
            t.validate(&call("sixes", [Term::var(0)])).unwrap_err(),
            GoalError::UnknownRelation("sixes".into())
        );
        assert!(matches!(
            t.validate(&conj(
                succeed(),
                call("fives", [Term::var(0), Term::var(1)])
            )),
            Err(GoalError::ArityMismatch {
                expected: 1,
                found: 2,
                ..
            })
        ));
        // unknown relation reachable only through a delay and a fresh
        let g = delay(|| fresh(|x| call("nope", [x])));
        assert_eq!(
            t.validate(&g).unwrap_err(),
            GoalError::UnknownRelation("nope".into())
        );
    }

    #[test]
    fn fresh_n_allocates_in_order() {
        let g = fresh_n(2, |vs| equalo(vs[0].clone(), vs[1].clone()));
        let GoalExpr::Fresh(outer) = g else { panic!() };
        let GoalExpr::Fresh(inner) = outer(Term::var(7)) else {
            panic!()
        };
        assert_eq!(format!("{:?}", inner(Term::var(8))), "(equalo #7 #8)");
    }
}
