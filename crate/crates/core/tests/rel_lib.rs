use std::collections::BTreeMap;
use std::sync::Arc;

use kanren_core::rel::{build_num, pluso, read_num, standard_relations, sums_to_n};
use kanren_core::{Baseline, Limit, Query, RelationTable, Term};

fn table() -> Arc<RelationTable> {
    Arc::new(standard_relations())
}

fn pairs(answers: &[Term]) -> BTreeMap<(u64, u64), usize> {
    let mut out = BTreeMap::new();
    for a in answers {
        let items = a.to_vec().expect("answer is a list");
        let x = read_num(&items[0]).expect("x is a numeral");
        let y = read_num(&items[1]).expect("y is a numeral");
        *out.entry((x, y)).or_insert(0) += 1;
    }
    out
}

fn oracle(n: u64) -> BTreeMap<(u64, u64), usize> {
    (0..=n).map(|x| ((x, n - x), 1)).collect()
}

#[test]
fn forward_addition() {
    let q = Query::new(1, |v| pluso(build_num(2), build_num(3), v[0].clone()));
    let got = q.run(&Baseline, &table(), Limit::All).unwrap();
    assert_eq!(got, vec![build_num(5)]);

    let q = Query::new(1, |_| pluso(build_num(0), build_num(0), build_num(0)));
    assert_eq!(q.run(&Baseline, &table(), Limit::All).unwrap().len(), 1);
}

#[test]
fn forward_mode_matches_integer_sum() {
    let t = table();
    for a in 0..=64u64 {
        for b in (0..=64u64).step_by(7) {
            let q = Query::new(1, |v| pluso(build_num(a), build_num(b), v[0].clone()));
            let got = q.run(&Baseline, &t, Limit::All).unwrap();
            assert_eq!(got, vec![build_num(a + b)], "{a} + {b}");
        }
    }
}

#[test]
fn backward_mode_counts() {
    let t = table();
    let q = Query::new(2, |v| pluso(v[0].clone(), v[1].clone(), build_num(3)));
    assert_eq!(q.run(&Baseline, &t, Limit::All).unwrap().len(), 4);
    for c in 0..=64u64 {
        let q = Query::new(1, |v| sums_to_n(v[0].clone(), c));
        let got = q.run(&Baseline, &t, Limit::All).unwrap();
        assert_eq!(pairs(&got), oracle(c), "sums to {c}");
    }
}

#[test]
fn sums_to_n_zero_and_three() {
    let t = table();
    let q = Query::new(1, |v| sums_to_n(v[0].clone(), 0));
    let got = q.run(&Baseline, &t, Limit::All).unwrap();
    assert_eq!(got, vec![Term::list([Term::Nil, Term::Nil])]);
    let q = Query::new(1, |v| sums_to_n(v[0].clone(), 3));
    let got = q.run(&Baseline, &t, Limit::All).unwrap();
    assert_eq!(pairs(&got), oracle(3));
}

#[test]
fn sums_to_n_larger_counts() {
    let t = table();
    for n in [128u64, 256, 512] {
        let q = Query::new(1, |v| sums_to_n(v[0].clone(), n));
        let got = q.run(&Baseline, &t, Limit::All).unwrap();
        assert_eq!(got.len() as u64, n + 1);
        assert_eq!(pairs(&got), oracle(n));
    }
}
