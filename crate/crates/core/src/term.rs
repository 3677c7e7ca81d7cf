//! Terms, logic variables, walking, unification and reification.
//!
//! There is no occurs-check. A query such as `(equalo x (x))` builds a cyclic
//! binding; walking such a term terminates, but reifying it does not. Programs
//! that do this are outside what the engines support.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::subst::Subst;

/// Logic variable identifier. Allocated densely by fresh-variable introduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Interned symbol. Equality and hashing are on the intern index.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

impl Symbol {
    pub fn intern(name: &str) -> Symbol {
        let mut table = interner().lock().expect("symbol table poisoned");
        if let Some(&id) = table.ids.get(name) {
            return Symbol(id);
        }
        let id = table.names.len() as u32;
        let name: Arc<str> = Arc::from(name);
        table.names.push(name.clone());
        table.ids.insert(name, id);
        Symbol(id)
    }

    pub fn name(&self) -> Arc<str> {
        let table = interner().lock().expect("symbol table poisoned");
        table.names[self.0 as usize].clone()
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}", self.name())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Int(i64),
    Sym(Symbol),
}

/// A miniKanren expression.
///
/// Lists are right-nested pairs terminated by [`Term::Nil`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(Atom),
    Var(Var),
    Pair(Arc<Term>, Arc<Term>),
    Nil,
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Atom(Atom::Int(n))
    }

    pub fn sym(name: &str) -> Term {
        Term::Atom(Atom::Sym(Symbol::intern(name)))
    }

    pub fn var(id: u32) -> Term {
        Term::Var(Var(id))
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Pair(Arc::new(head), Arc::new(tail))
    }

    /// Proper list of the given items.
    pub fn list<I>(items: I) -> Term
    where
        I: IntoIterator<Item = Term>,
        I::IntoIter: DoubleEndedIterator,
    {
        items
            .into_iter()
            .rev()
            .fold(Term::Nil, |tail, head| Term::cons(head, tail))
    }

    pub fn as_var(&self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    /// Items of a proper list, or `None` for anything else.
    pub fn to_vec(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Nil => return Some(out),
                Term::Pair(h, t) => {
                    out.push((**h).clone());
                    cur = t;
                }
                _ => return None,
            }
        }
    }
}

impl From<i64> for Term {
    fn from(n: i64) -> Term {
        Term::int(n)
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Term {
        Term::Var(v)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(Atom::Int(n)) => write!(f, "{n}"),
            Term::Atom(Atom::Sym(s)) => write!(f, "{s}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Nil => f.write_str("()"),
            Term::Pair(head, tail) => {
                write!(f, "({head}")?;
                let mut rest: &Term = tail;
                loop {
                    match rest {
                        Term::Nil => break,
                        Term::Pair(h, t) => {
                            write!(f, " {h}")?;
                            rest = t;
                        }
                        other => {
                            write!(f, " . {other}")?;
                            break;
                        }
                    }
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A substitution together with the next fresh variable id.
#[derive(Clone, Debug, Default)]
pub struct State {
    pub subst: Subst,
    pub counter: u32,
}

impl State {
    pub fn empty() -> State {
        State::default()
    }

    /// Empty substitution with `n` variables (ids `0..n`) already allocated.
    pub fn with_vars(n: u32) -> State {
        State {
            subst: Subst::new(),
            counter: n,
        }
    }

    /// Allocates the next variable, returning it with the extended state.
    pub fn fresh(&self) -> (Var, State) {
        let v = Var(self.counter);
        let next = State {
            subst: self.subst.clone(),
            counter: self.counter + 1,
        };
        (v, next)
    }

    pub fn unify(&self, u: &Term, v: &Term) -> Option<State> {
        unify(u, v, &self.subst).map(|subst| State {
            subst,
            counter: self.counter,
        })
    }
}

/// Follows variable bindings until reaching a non-variable or an unbound variable.
pub fn walk(t: &Term, s: &Subst) -> Term {
    let mut cur = t;
    loop {
        match cur {
            Term::Var(v) => match s.get(*v) {
                Some(bound) => cur = bound,
                None => return cur.clone(),
            },
            _ => return cur.clone(),
        }
    }
}

/// Extends `s` so that `u` and `v` are equal, or returns `None` when they cannot be.
pub fn unify(u: &Term, v: &Term, s: &Subst) -> Option<Subst> {
    let u = walk(u, s);
    let v = walk(v, s);
    match (&u, &v) {
        (Term::Var(a), Term::Var(b)) if a == b => Some(s.clone()),
        (Term::Var(a), _) => Some(extend(s, *a, v)),
        (_, Term::Var(b)) => Some(extend(s, *b, u)),
        (Term::Pair(uh, ut), Term::Pair(vh, vt)) => {
            let s = unify(uh, vh, s)?;
            unify(ut, vt, &s)
        }
        (Term::Atom(a), Term::Atom(b)) if a == b => Some(s.clone()),
        (Term::Nil, Term::Nil) => Some(s.clone()),
        _ => None,
    }
}

fn extend(s: &Subst, v: Var, t: Term) -> Subst {
    s.insert(v, t)
        .expect("unify only binds variables that walk reported unbound")
}

/// Fully resolves `t` under `s`, leaving unbound variables in place.
pub fn walk_star(t: &Term, s: &Subst) -> Term {
    match walk(t, s) {
        Term::Pair(h, tl) => Term::cons(walk_star(&h, s), walk_star(&tl, s)),
        other => other,
    }
}

/// Renders the answer for `query_vars` in `st`.
///
/// A single query variable yields its value; several yield a list of values.
/// Unbound variables become the symbols `_0`, `_1`, … in first-occurrence order.
pub fn reify(st: &State, query_vars: &[Var]) -> Term {
    let resolved = match query_vars {
        [single] => walk_star(&Term::Var(*single), &st.subst),
        many => Term::list(
            many.iter()
                .map(|v| walk_star(&Term::Var(*v), &st.subst))
                .collect::<Vec<_>>(),
        ),
    };
    let mut names = HashMap::new();
    rename(&resolved, &mut names)
}

fn rename(t: &Term, names: &mut HashMap<Var, Term>) -> Term {
    match t {
        Term::Var(v) => {
            let next = names.len();
            names
                .entry(*v)
                .or_insert_with(|| Term::sym(&format!("_{next}")))
                .clone()
        }
        Term::Pair(h, tl) => {
            let h = rename(h, names);
            let tl = rename(tl, names);
            Term::cons(h, tl)
        }
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subst(bindings: &[(u32, Term)]) -> Subst {
        bindings.iter().fold(Subst::new(), |s, (k, v)| {
            s.insert(Var(*k), v.clone()).unwrap()
        })
    }

    #[test]
    fn walk_examples() {
        assert_eq!(walk(&Term::int(5), &Subst::new()), Term::int(5));
        assert_eq!(
            walk(&Term::var(0), &subst(&[(0, Term::int(5))])),
            Term::int(5)
        );
        let chain = subst(&[(0, Term::var(1)), (1, Term::int(6))]);
        assert_eq!(walk(&Term::var(0), &chain), Term::int(6));
        assert_eq!(walk(&Term::var(2), &chain), Term::var(2));
    }

    #[test]
    fn walk_stops_at_pairs() {
        let s = subst(&[(0, Term::cons(Term::var(1), Term::Nil)), (1, Term::int(3))]);
        assert_eq!(walk(&Term::var(0), &s), Term::cons(Term::var(1), Term::Nil));
        assert_eq!(walk_star(&Term::var(0), &s), Term::list([Term::int(3)]));
    }

    #[test]
    fn unify_examples() {
        let empty = Subst::new();
        let same = unify(&Term::int(5), &Term::int(5), &empty).unwrap();
        assert_eq!(same.len(), 0);

        let bound = unify(&Term::var(0), &Term::int(5), &empty).unwrap();
        assert_eq!(bound.get(Var(0)), Some(&Term::int(5)));
        assert_eq!(bound.len(), 1);

        let pair = unify(
            &Term::cons(Term::var(0), Term::var(1)),
            &Term::cons(Term::int(5), Term::int(6)),
            &empty,
        )
        .unwrap();
        assert_eq!(pair.get(Var(0)), Some(&Term::int(5)));
        assert_eq!(pair.get(Var(1)), Some(&Term::int(6)));
        assert_eq!(pair.len(), 2);

        assert!(unify(&Term::int(1), &Term::int(2), &empty).is_none());
    }

    #[test]
    fn unify_mismatched_shapes_fail() {
        let empty = Subst::new();
        assert!(unify(&Term::Nil, &Term::int(0), &empty).is_none());
        assert!(unify(&Term::list([Term::int(1)]), &Term::Nil, &empty).is_none());
        assert!(unify(&Term::sym("a"), &Term::sym("b"), &empty).is_none());
        assert!(unify(&Term::sym("a"), &Term::sym("a"), &empty).is_some());
    }

    #[test]
    fn unify_same_var_is_noop() {
        let s = unify(&Term::var(3), &Term::var(3), &Subst::new()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn unify_leaves_input_untouched() {
        let s = subst(&[(0, Term::int(1))]);
        let ext = unify(&Term::var(1), &Term::int(2), &s).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(Var(1)), None);
        assert_eq!(ext.get(Var(0)), Some(&Term::int(1)));
    }

    #[test]
    fn reify_examples() {
        let st = State {
            subst: subst(&[(0, Term::int(5))]),
            counter: 1,
        };
        assert_eq!(reify(&st, &[Var(0)]), Term::int(5));

        let st = State::with_vars(1);
        assert_eq!(reify(&st, &[Var(0)]).to_string(), "_0");

        let st = State {
            subst: subst(&[(0, Term::cons(Term::int(1), Term::var(2)))]),
            counter: 3,
        };
        assert_eq!(reify(&st, &[Var(0)]).to_string(), "(1 . _0)");
    }

    #[test]
    fn reify_names_in_first_occurrence_order() {
        let st = State {
            subst: subst(&[(0, Term::list([Term::var(5), Term::var(3), Term::var(5)]))]),
            counter: 6,
        };
        assert_eq!(reify(&st, &[Var(0), Var(1)]).to_string(), "((_0 _1 _0) _2)");
    }

    #[test]
    fn display_lists() {
        assert_eq!(
            Term::list([Term::int(5), Term::int(6)]).to_string(),
            "(5 6)"
        );
        assert_eq!(Term::Nil.to_string(), "()");
        assert_eq!(
            Term::list([Term::sym("a"), Term::list([])]).to_string(),
            "(a ())"
        );
    }

    #[test]
    fn fresh_advances_counter() {
        let (v, st) = State::empty().fresh();
        assert_eq!(v, Var(0));
        assert_eq!(st.counter, 1);
        let (w, _) = st.fresh();
        assert_eq!(w, Var(1));
    }
}
