//! Library relations: the infinite-stream examples, `failo`, and relational
//! addition over little-endian binary numerals.
//!
//! Numerals are lists of bits with the least significant bit first and no
//! trailing zero, so zero is `()` and five is `(1 0 1)`. Disjunctions with more
//! than two branches are written as `disj+c`; the baseline evaluator reads
//! them as nested binary disjunctions.

use crate::goal::{
    call, conj_plus, delay, disj, disj_conc, equalo, fresh_n, GoalExpr, RelationTable,
};
use crate::term::Term;

pub fn build_num(mut n: u64) -> Term {
    let mut bits = Vec::new();
    while n > 0 {
        bits.push(Term::int((n & 1) as i64));
        n >>= 1;
    }
    Term::list(bits)
}

/// Inverse of [`build_num`]; `None` for anything that is not a canonical numeral.
pub fn read_num(t: &Term) -> Option<u64> {
    let bits = t.to_vec()?;
    if bits.last().is_some_and(|b| *b != Term::int(1)) || bits.len() > 64 {
        return None;
    }
    bits.iter()
        .enumerate()
        .try_fold(0u64, |acc, (i, b)| match b {
            Term::Atom(crate::term::Atom::Int(0)) => Some(acc),
            Term::Atom(crate::term::Atom::Int(1)) => Some(acc | 1 << i),
            _ => None,
        })
}

fn nil() -> Term {
    Term::Nil
}

fn one() -> Term {
    build_num(1)
}

fn bit(b: i64) -> Term {
    Term::int(b)
}

fn repeating(x: Term, n: i64, name: &'static str) -> GoalExpr {
    let again = x.clone();
    disj(equalo(x, n), delay(move || call(name, [again.clone()])))
}

pub fn fives(x: Term) -> GoalExpr {
    call("fives", [x])
}

pub fn sixes(x: Term) -> GoalExpr {
    call("sixes", [x])
}

pub fn sevens(x: Term) -> GoalExpr {
    call("sevens", [x])
}

pub fn failo(x: Term) -> GoalExpr {
    call("failo", [x])
}

pub fn pluso(a: Term, b: Term, c: Term) -> GoalExpr {
    call("pluso", [a, b, c])
}

/// `(sums-to-n q n)`: `q` is a pair `(x y)` of numerals with `x + y = n`.
pub fn sums_to_n(q: Term, n: u64) -> GoalExpr {
    call("sums-to-n", [q, build_num(n)])
}

fn poso(n: Term) -> GoalExpr {
    fresh_n(2, move |v| {
        equalo(Term::cons(v[0].clone(), v[1].clone()), n.clone())
    })
}

fn greater_than_one(n: Term) -> GoalExpr {
    fresh_n(3, move |v| {
        let shape = Term::cons(v[0].clone(), Term::cons(v[1].clone(), v[2].clone()));
        equalo(shape, n.clone())
    })
}

const ADDER_TABLE: [[i64; 5]; 8] = [
    // b x y r c
    [0, 0, 0, 0, 0],
    [1, 0, 0, 1, 0],
    [0, 1, 0, 1, 0],
    [1, 1, 0, 0, 1],
    [0, 0, 1, 1, 0],
    [1, 0, 1, 0, 1],
    [0, 1, 1, 0, 1],
    [1, 1, 1, 1, 1],
];

fn full_addero(b: Term, x: Term, y: Term, r: Term, c: Term) -> GoalExpr {
    let vars = [b, x, y, r, c];
    let rows = ADDER_TABLE.iter().map(|row| {
        conj_plus(
            vars.iter()
                .zip(row)
                .map(|(v, &val)| equalo(v.clone(), val))
                .collect::<Vec<_>>(),
        )
    });
    disj_conc(rows).expect("eight rows")
}

fn delayed_addero(d: Term, n: Term, m: Term, r: Term) -> GoalExpr {
    delay(move || call("addero", [d.clone(), n.clone(), m.clone(), r.clone()]))
}

fn addero(d: Term, n: Term, m: Term, r: Term) -> GoalExpr {
    let branches = vec![
        conj_plus([
            equalo(d.clone(), 0),
            equalo(m.clone(), nil()),
            equalo(n.clone(), r.clone()),
        ]),
        conj_plus([
            equalo(d.clone(), 0),
            equalo(n.clone(), nil()),
            equalo(m.clone(), r.clone()),
            poso(m.clone()),
        ]),
        conj_plus([
            equalo(d.clone(), 1),
            equalo(m.clone(), nil()),
            delayed_addero(bit(0), n.clone(), one(), r.clone()),
        ]),
        conj_plus([
            equalo(d.clone(), 1),
            equalo(n.clone(), nil()),
            poso(m.clone()),
            delayed_addero(bit(0), one(), m.clone(), r.clone()),
        ]),
        conj_plus([equalo(n.clone(), one()), equalo(m.clone(), one()), {
            let (d, r) = (d.clone(), r.clone());
            fresh_n(2, move |v| {
                let (a, c) = (v[0].clone(), v[1].clone());
                conj_plus([
                    equalo(Term::list([a.clone(), c.clone()]), r.clone()),
                    full_addero(d.clone(), bit(1), bit(1), a, c),
                ])
            })
        }]),
        conj_plus([
            equalo(n.clone(), one()),
            gen_addero(d.clone(), n.clone(), m.clone(), r.clone()),
        ]),
        conj_plus([
            equalo(m.clone(), one()),
            greater_than_one(n.clone()),
            greater_than_one(r.clone()),
            delayed_addero(d.clone(), one(), n.clone(), r.clone()),
        ]),
        conj_plus([greater_than_one(n.clone()), gen_addero(d, n, m, r)]),
    ];
    disj_conc(branches).expect("eight branches")
}

fn gen_addero(d: Term, n: Term, m: Term, r: Term) -> GoalExpr {
    fresh_n(7, move |v| {
        let [a, b, c, e, x, y, z] = [0, 1, 2, 3, 4, 5, 6].map(|i| v[i].clone());
        conj_plus([
            equalo(Term::cons(a.clone(), x.clone()), n.clone()),
            equalo(Term::cons(b.clone(), y.clone()), m.clone()),
            poso(y.clone()),
            equalo(Term::cons(c.clone(), z.clone()), r.clone()),
            poso(z.clone()),
            full_addero(d.clone(), a, b, c, e.clone()),
            delayed_addero(e, x, y, z),
        ])
    })
}

/// Every relation in this module, registered under its query-language name.
pub fn standard_relations() -> RelationTable {
    let mut t = RelationTable::new();
    let defs: Vec<(&str, usize, Box<dyn Fn(&[Term]) -> GoalExpr + Send + Sync>)> = vec![
        ("failo", 1, Box::new(|_| equalo(1, 2))),
        (
            "fives",
            1,
            Box::new(|a| repeating(a[0].clone(), 5, "fives")),
        ),
        (
            "sixes",
            1,
            Box::new(|a| repeating(a[0].clone(), 6, "sixes")),
        ),
        (
            "sevens",
            1,
            Box::new(|a| repeating(a[0].clone(), 7, "sevens")),
        ),
        ("poso", 1, Box::new(|a| poso(a[0].clone()))),
        (">1o", 1, Box::new(|a| greater_than_one(a[0].clone()))),
        (
            "full-addero",
            5,
            Box::new(|a| {
                full_addero(
                    a[0].clone(),
                    a[1].clone(),
                    a[2].clone(),
                    a[3].clone(),
                    a[4].clone(),
                )
            }),
        ),
        (
            "addero",
            4,
            Box::new(|a| addero(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone())),
        ),
        (
            "gen-addero",
            4,
            Box::new(|a| gen_addero(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone())),
        ),
        (
            "pluso",
            3,
            Box::new(|a| addero(bit(0), a[0].clone(), a[1].clone(), a[2].clone())),
        ),
        (
            "sums-to-n",
            2,
            Box::new(|a| {
                let (q, n) = (a[0].clone(), a[1].clone());
                fresh_n(2, move |v| {
                    let (x, y) = (v[0].clone(), v[1].clone());
                    conj_plus([
                        equalo(q.clone(), Term::list([x.clone(), y.clone()])),
                        addero(bit(0), x, y, n.clone()),
                    ])
                })
            }),
        ),
    ];
    for (name, arity, body) in defs {
        t.define(name, arity, body)
            .expect("library relations are well formed");
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerals() {
        assert_eq!(build_num(0), Term::Nil);
        assert_eq!(build_num(5).to_string(), "(1 0 1)");
        assert_eq!(build_num(6).to_string(), "(0 1 1)");
        for n in 0..=1024 {
            assert_eq!(read_num(&build_num(n)), Some(n));
        }
    }

    #[test]
    fn read_num_rejects_non_canonical() {
        assert_eq!(read_num(&Term::list([bit(1), bit(0)])), None);
        assert_eq!(read_num(&Term::list([bit(2)])), None);
        assert_eq!(read_num(&Term::int(3)), None);
    }

    #[test]
    fn library_registers_everything() {
        let t = standard_relations();
        for name in [
            "failo",
            "fives",
            "sixes",
            "sevens",
            "poso",
            ">1o",
            "full-addero",
            "addero",
            "gen-addero",
            "pluso",
            "sums-to-n",
        ] {
            assert!(t.contains(name), "{name}");
        }
        t.validate(&sums_to_n(Term::var(0), 3)).unwrap();
    }
}
