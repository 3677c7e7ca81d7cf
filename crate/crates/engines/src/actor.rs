//! One OS thread per stream process, blocking on capacity-one mailboxes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use kanren_core::{Engine, EngineError, GoalExpr, Limit, RelationTable, State};

use crate::node::{self, Event, Node, Runtime, Wait};
use crate::protocol::Net;
use crate::trace::TraceSink;
use crate::RunStats;

const STACK_SIZE: usize = 512 * 1024;

struct Shared {
    net: Net,
    table: Arc<RelationTable>,
    live: AtomicUsize,
    spawned: AtomicUsize,
}

#[derive(Clone)]
struct Actors(Arc<Shared>);

impl Runtime for Actors {
    fn net(&self) -> &Net {
        &self.0.net
    }

    fn table(&self) -> &RelationTable {
        &self.0.table
    }

    fn start(&self, node: Node) {
        self.0.live.fetch_add(1, Ordering::AcqRel);
        self.0.spawned.fetch_add(1, Ordering::Relaxed);
        let rt = self.clone();
        thread::Builder::new()
            .name(format!("kanren-{}", node.me.id()))
            .stack_size(STACK_SIZE)
            .spawn(move || {
                run(node, &rt);
                rt.0.live.fetch_sub(1, Ordering::AcqRel);
            })
            .expect("failed to spawn a stream thread");
    }
}

fn run(mut node: Node, rt: &Actors) {
    let mut wait = Wait::Request;
    loop {
        let ev: Event = match wait {
            Wait::Request => node.me.requests().recv().into(),
            Wait::Reply => node.me.inbox().recv().into(),
            Wait::Halt => return,
        };
        wait = node.on_event(ev, rt);
    }
}

#[derive(Clone)]
pub struct ActorEngine {
    trace: Option<Arc<dyn TraceSink>>,
    quiesce_timeout: Duration,
}

impl Default for ActorEngine {
    fn default() -> Self {
        ActorEngine::new()
    }
}

impl ActorEngine {
    pub fn new() -> ActorEngine {
        ActorEngine {
            trace: None,
            quiesce_timeout: Duration::from_secs(10),
        }
    }

    pub fn with_trace(mut self, sink: Arc<dyn TraceSink>) -> ActorEngine {
        self.trace = Some(sink);
        self
    }

    /// How long to wait for every process to exit after the last answer.
    pub fn with_quiesce_timeout(mut self, t: Duration) -> ActorEngine {
        self.quiesce_timeout = t;
        self
    }

    pub fn solve_with_stats(
        &self,
        goal: &GoalExpr,
        init: State,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<(Vec<State>, RunStats), EngineError> {
        table.validate(goal)?;
        let rt = Actors(Arc::new(Shared {
            net: Net::new(Some(1), self.trace.clone()),
            table: table.clone(),
            live: AtomicUsize::new(0),
            spawned: AtomicUsize::new(0),
        }));
        let top = node::apply(goal, init, &rt);
        let answers = node::take(&rt.0.net, top, limit);
        let leaked = wait_for_zero(&rt.0.live, self.quiesce_timeout);
        let stats = RunStats {
            spawned: rt.0.spawned.load(Ordering::Relaxed),
            leaked,
        };
        Ok((answers, stats))
    }
}

/// Waits until `live` drops to zero; returns what is left at the deadline.
pub(crate) fn wait_for_zero(live: &AtomicUsize, timeout: Duration) -> usize {
    let deadline = Instant::now() + timeout;
    let mut pause = Duration::from_micros(20);
    loop {
        let n = live.load(Ordering::Acquire);
        if n == 0 || Instant::now() >= deadline {
            return n;
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(5));
    }
}

impl Engine for ActorEngine {
    fn name(&self) -> String {
        "actor".into()
    }

    fn solve(
        &self,
        goal: &GoalExpr,
        init: State,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<Vec<State>, EngineError> {
        let (answers, stats) = self.solve_with_stats(goal, init, table, limit)?;
        if stats.leaked > 0 {
            return Err(EngineError::Internal(format!(
                "{} stream processes still running after the query",
                stats.leaked
            )));
        }
        Ok(answers)
    }
}
