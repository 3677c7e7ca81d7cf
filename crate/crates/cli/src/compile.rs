//! Turns a parsed script into a relation table and a query.

use std::sync::Arc;

use kanren_core::goal::{conj_plus, conj_sce, delay, disj, disj_conc, disj_plus, equalo, fresh_n};
use kanren_core::rel::build_num;
use kanren_core::{GoalError, GoalExpr, Limit, Query, RelationTable, Term};

use crate::syntax::{Goal, RunKind, Script, Tm};

/// A compiled script, ready to hand to any engine.
pub struct Program {
    pub table: Arc<RelationTable>,
    pub query: Query,
    pub limit: Limit,
}

type Env = Vec<(String, Term)>;

fn lookup(env: &Env, name: &str) -> Term {
    env.iter()
        .rev()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t.clone())
        .unwrap_or_else(|| panic!("parser let unbound `{name}` through"))
}

fn term(t: &Tm, env: &Env) -> Term {
    match t {
        Tm::Var(v) => lookup(env, v),
        Tm::Int(i) => Term::int(*i),
        Tm::Sym(s) => Term::sym(s),
        Tm::Nil => Term::Nil,
        Tm::Pair(h, t) => Term::cons(term(h, env), term(t, env)),
        Tm::Oleg(n) => build_num(*n),
    }
}

fn goals(gs: &[Goal], env: &Env) -> Vec<GoalExpr> {
    gs.iter().map(|g| goal(g, env)).collect()
}

fn goal(g: &Goal, env: &Env) -> GoalExpr {
    match g {
        Goal::Equalo(u, v) => equalo(term(u, env), term(v, env)),
        Goal::Conj(gs) => conj_plus(goals(gs, env)),
        Goal::Disj(a, b) => disj(goal(a, env), goal(b, env)),
        Goal::DisjPlus(gs) => disj_plus(goals(gs, env)).expect("parser rejects empty disj+"),
        Goal::DisjConc(gs) => disj_conc(goals(gs, env)).expect("parser rejects empty disj+c"),
        Goal::ConjSce(a, b) => conj_sce(goal(a, env), goal(b, env)),
        Goal::Fresh(names, body) => {
            let (names, body, env) = (names.clone(), Arc::new(body.clone()), env.clone());
            fresh_n(names.len(), move |vs| {
                let mut env = env.clone();
                env.extend(names.iter().cloned().zip(vs.iter().cloned()));
                conj_plus(goals(&body, &env))
            })
        }
        Goal::Delay(inner) => {
            let (inner, env) = (Arc::new((**inner).clone()), env.clone());
            delay(move || goal(&inner, &env))
        }
        Goal::Call(name, args) => {
            let args: Vec<Term> = args.iter().map(|a| term(a, env)).collect();
            kanren_core::goal::call(name, args)
        }
    }
}

/// Registers the script's definitions on top of `library` and builds the query.
pub fn compile(script: &Script, mut library: RelationTable) -> Result<Program, GoalError> {
    for def in &script.defs {
        let params = def.params.clone();
        let body = Arc::new(def.body.clone());
        library.define(&def.name, params.len(), move |args| {
            let env: Env = params.iter().cloned().zip(args.iter().cloned()).collect();
            conj_plus(goals(&body, &env))
        })?;
    }
    let run = &script.run;
    let query = Query::new(run.vars.len(), |vars| {
        let env: Env = run.vars.iter().cloned().zip(vars.iter().cloned()).collect();
        conj_plus(goals(&run.goals, &env))
    });
    let limit = match run.kind {
        RunKind::Star => Limit::All,
        RunKind::Count(n) => Limit::Count(n),
    };
    library.validate(&query.goal)?;
    Ok(Program {
        table: Arc::new(library),
        query,
        limit,
    })
}
