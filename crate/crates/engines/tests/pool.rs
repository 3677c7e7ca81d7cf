use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use proptest::prelude::*;

use kanren_core::goal::{conj, conj_sce, delay, disj, disj_plus, equalo, fresh};
use kanren_core::rel::{failo, fives, sevens, sixes, standard_relations, sums_to_n};
use kanren_core::{Baseline, GoalExpr, Limit, Query, RelationTable, Term};
use kanren_engines::{check_trace, Inbound, MemoryTrace, Pool, PoolEngine, Reply};

fn table() -> Arc<RelationTable> {
    Arc::new(standard_relations())
}

#[derive(Clone, Debug)]
enum Side {
    Var(usize),
    Int(i64),
    Pair(i64, i64),
}

#[derive(Clone, Debug)]
enum G {
    Eq(Side, Side),
    Conj(Box<G>, Box<G>),
    Disj(Box<G>, Box<G>),
    DisjPlus(Vec<G>),
    Fresh(Box<G>),
    Delay(Box<G>),
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![
        (0usize..4).prop_map(Side::Var),
        (0i64..3).prop_map(Side::Int),
        (0i64..2, 0i64..2).prop_map(|(a, b)| Side::Pair(a, b)),
    ]
}

fn goal() -> impl Strategy<Value = G> {
    let leaf = (side(), side()).prop_map(|(a, b)| G::Eq(a, b));
    leaf.prop_recursive(5, 40, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| G::Conj(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| G::Disj(Box::new(a), Box::new(b))),
            prop::collection::vec(inner.clone(), 1..4).prop_map(G::DisjPlus),
            inner.clone().prop_map(|g| G::Fresh(Box::new(g))),
            inner.prop_map(|g| G::Delay(Box::new(g))),
        ]
    })
}

fn term(s: &Side, env: &[Term]) -> Term {
    match s {
        Side::Var(i) => env[i % env.len()].clone(),
        Side::Int(n) => Term::int(*n),
        Side::Pair(a, b) => Term::list([Term::int(*a), Term::int(*b)]),
    }
}

// Variables are only ever bound to ground terms or to each other, so no cycles.
fn build(g: &G, env: &[Term]) -> GoalExpr {
    match g {
        G::Eq(a, b) => equalo(term(a, env), term(b, env)),
        G::Conj(a, b) => conj(build(a, env), build(b, env)),
        G::Disj(a, b) => disj(build(a, env), build(b, env)),
        G::DisjPlus(gs) => disj_plus(gs.iter().map(|g| build(g, env))).unwrap(),
        G::Fresh(g) => {
            let (g, env) = (g.clone(), env.to_vec());
            fresh(move |v| {
                let mut env = env.clone();
                env.push(v);
                build(&g, &env)
            })
        }
        G::Delay(g) => {
            let (g, env) = (g.clone(), env.to_vec());
            delay(move || build(&g, &env))
        }
    }
}

fn reified(q: &Query, states: &[kanren_core::State]) -> Vec<String> {
    states
        .iter()
        .map(|s| kanren_core::reify(s, &q.vars).to_string())
        .collect()
}

fn pool_run(engine: PoolEngine, q: &Query, limit: Limit) -> Vec<String> {
    let trace = Arc::new(MemoryTrace::new());
    let (states, stats) = engine
        .with_trace(trace.clone())
        .solve_with_stats(&q.goal, q.initial_state(), &table(), limit)
        .unwrap();
    let report = check_trace(&trace.events());
    assert!(report.is_clean(), "{:?}", report.violations);
    assert_eq!(stats.leaked, 0);
    reified(q, &states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pool_matches_baseline_order(g in goal(), n in prop::option::of(1usize..12)) {
        let q = Query::new(2, |v| build(&g, v));
        let limit = n.map_or(Limit::All, Limit::Count);
        let expected = q.run(&Baseline, &table(), limit).unwrap();
        let expected: Vec<String> = expected.iter().map(|t| t.to_string()).collect();
        for w in [1, 2, 4, 8] {
            prop_assert_eq!(&pool_run(PoolEngine::new(w), &q, limit), &expected, "pool({})", w);
        }
    }
}

#[test]
fn jitter_does_not_change_answers() {
    let golden = Query::new(1, |v| {
        disj_plus([
            fives(v[0].clone()),
            sixes(v[0].clone()),
            sevens(v[0].clone()),
        ])
        .unwrap()
    });
    let sums = Query::new(1, |v| sums_to_n(v[0].clone(), 16));
    let mut expected_sums: Vec<String> = sums
        .run(&Baseline, &table(), Limit::All)
        .unwrap()
        .iter()
        .map(|t| t.to_string())
        .collect();
    expected_sums.sort();
    for round in 0..10 {
        let engine = PoolEngine::new(4).with_jitter(true);
        assert_eq!(
            pool_run(engine.clone(), &golden, Limit::Count(9)),
            ["5", "6", "5", "7", "5", "6", "5", "7", "5"],
            "round {round}"
        );
        let mut got = pool_run(engine, &sums, Limit::All);
        got.sort();
        assert_eq!(got, expected_sums, "round {round}");
    }
}

#[test]
fn hopeless_short_circuit_finishes_on_one_worker() {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let q = Query::new(1, |v| conj_sce(fives(v[0].clone()), failo(v[0].clone())));
        let _ = tx.send(pool_run(PoolEngine::new(1), &q, Limit::All));
    });
    let got = rx
        .recv_timeout(Duration::from_secs(10))
        .expect("conj-sce(fives, failo) did not finish");
    assert!(got.is_empty());
}

#[test]
fn suspended_continuations_run_on_delivery() {
    let pool = Pool::new(2, table(), None, false);
    let a = pool.net().new_stream();
    let b = pool.net().new_stream();
    let (tx, rx) = mpsc::channel();

    let tx1 = tx.clone();
    pool.suspend_on_request(&a, move |msg| {
        let who = match msg {
            Inbound::Request { sender } => format!("request from {}", sender.id().0),
            Inbound::Done => "done".into(),
        };
        tx1.send(who).unwrap();
    });
    let tx2 = tx.clone();
    pool.suspend_on_result(&b, move |env| {
        tx2.send(format!("{} from {}", env.reply.tag().name(), env.from.0))
            .unwrap();
    });
    pool.spawn(move || tx.send("spawned".into()).unwrap());

    pool.net().request(&a, &b).unwrap();
    pool.net().publish(&a, &b, Reply::Close);

    let mut got: Vec<String> = (0..3)
        .map(|_| rx.recv_timeout(Duration::from_secs(5)).unwrap())
        .collect();
    got.sort();
    let mut expected = vec![
        format!("request from {}", b.id().0),
        format!("{} from {}", kanren_engines::Tag::Close.name(), a.id().0),
        "spawned".to_string(),
    ];
    expected.sort();
    assert_eq!(got, expected);
    assert_eq!(pool.live(), 0);
    pool.shutdown();
}

#[test]
fn pool_api_solves_and_quiesces() {
    let t = table();
    let pool = Pool::new(3, t, None, false);
    let q = Query::new(1, |v| disj(fives(v[0].clone()), sixes(v[0].clone())));
    let top = pool.apply(&q.goal, q.initial_state());
    let got = reified(&q, &pool.take(top, Limit::Count(4)));
    assert_eq!(got, ["5", "6", "5", "6"]);
    assert_eq!(pool.quiesce(Duration::from_secs(5)), 0);
    assert!(pool.spawned() > 0);
    pool.shutdown();
}
