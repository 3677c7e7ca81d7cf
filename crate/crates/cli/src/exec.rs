//! Running compiled programs on a chosen engine under a wall-clock limit, and
//! comparing the answers of two engines.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use kanren_core::{Baseline, Engine, EngineError, Limit, Term};
use kanren_engines::{ActorEngine, PoolEngine, TraceSink};

use crate::compile::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineKind {
    Baseline,
    Actor,
    Pool,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Baseline => "baseline",
            EngineKind::Actor => "actor",
            EngineKind::Pool => "pool",
        })
    }
}

pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Builds an engine; `workers` only matters for the pool and `trace` is
/// ignored by the baseline, which sends no messages.
pub fn build_engine(
    kind: EngineKind,
    workers: usize,
    trace: Option<Arc<dyn TraceSink>>,
) -> Arc<dyn Engine> {
    match kind {
        EngineKind::Baseline => Arc::new(Baseline),
        EngineKind::Actor => {
            let e = ActorEngine::new();
            Arc::new(match trace {
                Some(t) => e.with_trace(t),
                None => e,
            })
        }
        EngineKind::Pool => {
            let e = PoolEngine::new(workers);
            Arc::new(match trace {
                Some(t) => e.with_trace(t),
                None => e,
            })
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Answers(Vec<Term>, Duration),
    Timeout(Duration),
    Failed(EngineError),
}

/// Runs `program` on `engine`, giving up after `timeout`.
///
/// The engine runs on its own thread. On timeout that thread is abandoned and
/// keeps running until the process exits.
pub fn execute(
    program: &Arc<Program>,
    engine: Arc<dyn Engine>,
    limit: Limit,
    timeout: Option<Duration>,
) -> Outcome {
    let (tx, rx) = mpsc::channel();
    let prog = program.clone();
    let start = Instant::now();
    thread::Builder::new()
        .name("kanren-query".into())
        .stack_size(64 << 20)
        .spawn(move || {
            let r = prog.query.run(engine.as_ref(), &prog.table, limit);
            let _ = tx.send(r);
        })
        .expect("failed to spawn the query thread");
    let received = match timeout {
        Some(t) => rx.recv_timeout(t).map_err(|_| ()),
        None => rx.recv().map_err(|_| ()),
    };
    match received {
        Ok(Ok(answers)) => Outcome::Answers(answers, start.elapsed()),
        Ok(Err(e)) => Outcome::Failed(e),
        Err(()) if timeout.is_some() => Outcome::Timeout(start.elapsed()),
        Err(()) => Outcome::Failed(EngineError::Internal("query thread panicked".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DiffMode {
    Order,
    Multiset,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Same(usize),
    /// First position where the answer lists differ; under `Multiset` the
    /// position is in the sorted lists.
    Differ {
        index: usize,
        left: Option<Term>,
        right: Option<Term>,
    },
}

impl Verdict {
    pub fn is_same(&self) -> bool {
        matches!(self, Verdict::Same(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |t: &Option<Term>| t.as_ref().map_or("<none>".to_string(), |t| t.to_string());
        match self {
            Verdict::Same(n) => write!(f, "same ({n} answers)"),
            Verdict::Differ { index, left, right } => {
                write!(
                    f,
                    "differ at answer {index}: {} vs {}",
                    show(left),
                    show(right)
                )
            }
        }
    }
}

pub fn compare(left: &[Term], right: &[Term], mode: DiffMode) -> Verdict {
    let (l, r): (Vec<Term>, Vec<Term>) = match mode {
        DiffMode::Order => (left.to_vec(), right.to_vec()),
        DiffMode::Multiset => (sorted(left), sorted(right)),
    };
    let n = l.len().max(r.len());
    for i in 0..n {
        if l.get(i) != r.get(i) {
            return Verdict::Differ {
                index: i,
                left: l.get(i).cloned(),
                right: r.get(i).cloned(),
            };
        }
    }
    Verdict::Same(n)
}

fn sorted(ts: &[Term]) -> Vec<Term> {
    let mut keyed: BTreeMap<String, Vec<Term>> = BTreeMap::new();
    for t in ts {
        keyed.entry(t.to_string()).or_default().push(t.clone());
    }
    keyed.into_values().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(xs: &[i64]) -> Vec<Term> {
        xs.iter().map(|&x| Term::int(x)).collect()
    }

    #[test]
    fn order_and_multiset() {
        let a = ints(&[5, 6, 7]);
        let b = ints(&[5, 7, 6]);
        assert!(compare(&a, &a, DiffMode::Order).is_same());
        assert_eq!(
            compare(&a, &b, DiffMode::Order),
            Verdict::Differ {
                index: 1,
                left: Some(Term::int(6)),
                right: Some(Term::int(7))
            }
        );
        assert!(compare(&a, &b, DiffMode::Multiset).is_same());
        let c = ints(&[5, 6]);
        let v = compare(&a, &c, DiffMode::Multiset);
        assert_eq!(v.to_string(), "differ at answer 2: 7 vs <none>");
        assert!(!compare(&ints(&[5, 5, 6]), &ints(&[5, 6, 6]), DiffMode::Multiset).is_same());
    }
}
