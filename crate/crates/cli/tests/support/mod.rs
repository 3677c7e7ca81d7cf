//! Random terminating scripts over equalo, conj, disj, disj+, fresh and delay.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use kanren_cli::syntax::{Goal, Run, RunKind, Script, Tm};

pub struct Gen {
    rng: StdRng,
    next_fresh: usize,
    nested_vars: bool,
}

impl Gen {
    /// Only binds variables to ground terms or other variables, so no
    /// unification can build a cyclic term.
    pub fn new(rng: StdRng) -> Gen {
        Gen {
            rng,
            next_fresh: 0,
            nested_vars: false,
        }
    }

    /// Also puts variables inside pairs; fine for parsing, not for solving.
    pub fn with_nested_vars(rng: StdRng) -> Gen {
        Gen {
            rng,
            next_fresh: 0,
            nested_vars: true,
        }
    }

    fn ground(&mut self, depth: usize) -> Tm {
        match self.rng.gen_range(0..6) {
            0..=2 => Tm::Int(self.rng.gen_range(0..4)),
            3 => Tm::Nil,
            _ if depth == 0 => Tm::Int(self.rng.gen_range(0..4)),
            _ => Tm::Pair(
                Box::new(self.ground(depth - 1)),
                Box::new(self.ground(depth - 1)),
            ),
        }
    }

    fn side(&mut self, scope: &[String]) -> Tm {
        if self.nested_vars {
            self.term(scope, 2)
        } else if self.rng.gen_bool(0.45) {
            Tm::Var(scope[self.rng.gen_range(0..scope.len())].clone())
        } else {
            self.ground(2)
        }
    }

    fn term(&mut self, scope: &[String], depth: usize) -> Tm {
        match self.rng.gen_range(0..10) {
            0..=3 => Tm::Var(scope[self.rng.gen_range(0..scope.len())].clone()),
            4..=6 => Tm::Int(self.rng.gen_range(0..4)),
            7 => Tm::Nil,
            _ if depth == 0 => Tm::Int(self.rng.gen_range(0..4)),
            _ => Tm::Pair(
                Box::new(self.term(scope, depth - 1)),
                Box::new(self.term(scope, depth - 1)),
            ),
        }
    }

    fn goals(&mut self, n: usize, depth: usize, scope: &[String]) -> Vec<Goal> {
        (0..n).map(|_| self.goal(depth, scope)).collect()
    }

    /// A goal of nesting depth at most `depth`.
    pub fn goal(&mut self, depth: usize, scope: &[String]) -> Goal {
        if depth <= 1 || self.rng.gen_bool(0.25) {
            return Goal::Equalo(self.side(scope), self.side(scope));
        }
        let d = depth - 1;
        let choices = if d >= 2 { 6 } else { 5 };
        match self.rng.gen_range(0..choices) {
            0 => {
                let n = self.rng.gen_range(1..=3);
                Goal::Conj(self.goals(n, d, scope))
            }
            1 => Goal::Disj(Box::new(self.goal(d, scope)), Box::new(self.goal(d, scope))),
            2 => {
                let n = self.rng.gen_range(1..=4);
                Goal::DisjPlus(self.goals(n, d, scope))
            }
            3 => {
                let k = self.rng.gen_range(1..=2);
                let names: Vec<String> = (0..k)
                    .map(|_| {
                        self.next_fresh += 1;
                        format!("v{}", self.next_fresh)
                    })
                    .collect();
                let mut inner = scope.to_vec();
                inner.extend(names.iter().cloned());
                let n = self.rng.gen_range(1..=2);
                Goal::Fresh(names, self.goals(n, d, &inner))
            }
            4 => Goal::Delay(Box::new(self.goal(d, scope))),
            _ => Goal::Conj(vec![
                self.goal(d, scope),
                Goal::Delay(Box::new(self.goal(d - 1, scope))),
            ]),
        }
    }

    /// A script whose goal has depth at most 5, as `run*` or `run n` with n ≤ 20.
    pub fn script(&mut self, star: bool) -> Script {
        self.next_fresh = 0;
        let nvars = self.rng.gen_range(1..=2);
        let vars: Vec<String> = (0..nvars).map(|i| format!("q{i}")).collect();
        let goal = self.goal(5, &vars);
        let kind = if star {
            RunKind::Star
        } else {
            RunKind::Count(self.rng.gen_range(1..=20))
        };
        Script {
            defs: Vec::new(),
            run: Run {
                kind,
                vars,
                goals: vec![goal],
            },
        }
    }
}

/// Replaces every `disj+` by `disj+c`.
pub fn to_disj_conc(g: &Goal) -> Goal {
    let all = |gs: &[Goal]| gs.iter().map(to_disj_conc).collect::<Vec<_>>();
    match g {
        Goal::Equalo(..) | Goal::Call(..) => g.clone(),
        Goal::Conj(gs) => Goal::Conj(all(gs)),
        Goal::Disj(a, b) => Goal::Disj(Box::new(to_disj_conc(a)), Box::new(to_disj_conc(b))),
        Goal::DisjPlus(gs) | Goal::DisjConc(gs) => Goal::DisjConc(all(gs)),
        Goal::ConjSce(a, b) => Goal::ConjSce(Box::new(to_disj_conc(a)), Box::new(to_disj_conc(b))),
        Goal::Fresh(vs, gs) => Goal::Fresh(vs.clone(), all(gs)),
        Goal::Delay(g) => Goal::Delay(Box::new(to_disj_conc(g))),
    }
}

pub fn depth(g: &Goal) -> usize {
    let max = |gs: &[Goal]| gs.iter().map(depth).max().unwrap_or(0);
    match g {
        Goal::Equalo(..) | Goal::Call(..) => 1,
        Goal::Conj(gs) | Goal::DisjPlus(gs) | Goal::DisjConc(gs) | Goal::Fresh(_, gs) => {
            1 + max(gs)
        }
        Goal::Disj(a, b) | Goal::ConjSce(a, b) => 1 + depth(a).max(depth(b)),
        Goal::Delay(g) => 1 + depth(g),
    }
}
