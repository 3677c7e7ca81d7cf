//! Stream processes as suspendable tasks on a fixed set of worker threads.
//!
//! A task runs until it needs a message, then parks itself on the mailbox it
//! waits on. Delivering a message to a parked task puts it back on the shared
//! run queue. Mailboxes are unbounded here: a task cannot block a worker
//! waiting for space.

use std::cell::{Cell, RefCell};
use std::sync::atomic::{fence, AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_deque::{Injector, Steal};
use kanren_core::{Engine, EngineError, GoalExpr, Limit, RelationTable, State};

use crate::actor::wait_for_zero;
use crate::node::{self, Event, Node, Runtime, Wait};
use crate::protocol::{Envelope, Inbound, Net, Resume, StreamHandle};
use crate::trace::TraceSink;
use crate::RunStats;

enum Runnable {
    Node(Box<NodeTask>, Event),
    Closure(Box<dyn FnOnce() + Send>),
}

struct NodeTask {
    node: Node,
    pool: Arc<Shared>,
}

impl Resume<Inbound> for NodeTask {
    fn resume(self: Box<Self>, msg: Inbound) {
        let pool = self.pool.clone();
        pool.schedule(Runnable::Node(self, msg.into()));
    }
}

impl Resume<Envelope> for NodeTask {
    fn resume(self: Box<Self>, msg: Envelope) {
        let pool = self.pool.clone();
        pool.schedule(Runnable::Node(self, msg.into()));
    }
}

struct Shared {
    net: Net,
    table: Arc<RelationTable>,
    queue: Injector<Runnable>,
    sleep_lock: Mutex<()>,
    wake: Condvar,
    sleepers: AtomicUsize,
    shutdown: AtomicBool,
    live: AtomicUsize,
    spawned: AtomicUsize,
    jitter: bool,
}

impl Shared {
    fn schedule(&self, r: Runnable) {
        // A task woken by the task a worker is running goes to that worker's
        // slot and runs next; the worker is busy, so nothing is left idle.
        let r = match self.try_keep_local(r) {
            None => return,
            Some(r) => r,
        };
        self.queue.push(r);
        fence(Ordering::SeqCst);
        if self.sleepers.load(Ordering::SeqCst) > 0 {
            let _g = self.sleep_lock.lock().expect("pool lock poisoned");
            self.wake.notify_one();
        }
    }

    fn try_keep_local(&self, r: Runnable) -> Option<Runnable> {
        if self.jitter || !std::ptr::eq(CURRENT.with(|c| c.get()), self) {
            return Some(r);
        }
        NEXT.with(|slot| {
            let mut slot = slot.borrow_mut();
            if slot.is_none() {
                *slot = Some(r);
                None
            } else {
                Some(r)
            }
        })
    }

    fn next(&self) -> Option<Runnable> {
        if let Some(r) = NEXT.with(|slot| slot.borrow_mut().take()) {
            // Bounded, so a busy subtree cannot starve the shared queue.
            if LOCAL_RUNS.with(|n| n.replace(n.get() + 1)) < LOCAL_BUDGET {
                return Some(r);
            }
            LOCAL_RUNS.with(|n| n.set(0));
            self.queue.push(r);
        }
        loop {
            match self.queue.steal() {
                Steal::Success(r) => return Some(r),
                Steal::Retry => continue,
                Steal::Empty => {}
            }
            let guard = self.sleep_lock.lock().expect("pool lock poisoned");
            self.sleepers.fetch_add(1, Ordering::SeqCst);
            fence(Ordering::SeqCst);
            if !self.queue.is_empty() {
                self.sleepers.fetch_sub(1, Ordering::SeqCst);
                continue;
            }
            if self.shutdown.load(Ordering::SeqCst) {
                self.sleepers.fetch_sub(1, Ordering::SeqCst);
                return None;
            }
            let guard = self.wake.wait(guard).expect("pool lock poisoned");
            self.sleepers.fetch_sub(1, Ordering::SeqCst);
            drop(guard);
        }
    }

    fn park(self: &Arc<Self>, task: Box<NodeTask>, wait: Wait) {
        match wait {
            Wait::Request => {
                let me = task.node.me.clone();
                me.requests().park(task);
            }
            Wait::Reply => {
                let me = task.node.me.clone();
                me.inbox().park(task);
            }
            Wait::Halt => {
                self.live.fetch_sub(1, Ordering::AcqRel);
            }
        }
    }
}

impl Runtime for Arc<Shared> {
    fn net(&self) -> &Net {
        &self.net
    }

    fn table(&self) -> &RelationTable {
        &self.table
    }

    fn start(&self, node: Node) {
        self.live.fetch_add(1, Ordering::AcqRel);
        self.spawned.fetch_add(1, Ordering::Relaxed);
        let task = Box::new(NodeTask {
            node,
            pool: self.clone(),
        });
        self.park(task, Wait::Request);
    }
}

const LOCAL_BUDGET: u32 = 32;

thread_local! {
    static CURRENT: Cell<*const Shared> = const { Cell::new(std::ptr::null()) };
    static NEXT: RefCell<Option<Runnable>> = const { RefCell::new(None) };
    static LOCAL_RUNS: Cell<u32> = const { Cell::new(0) };
    static RNG: Cell<u64> = const { Cell::new(0x9e37_79b9_7f4a_7c15) };
}

fn jitter() {
    let x = RNG.with(|c| {
        let mut x = c.get();
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        c.set(x);
        x
    });
    match x % 16 {
        0 => thread::sleep(Duration::from_micros(20)),
        1..=4 => thread::yield_now(),
        _ => {}
    }
}

fn worker(shared: Arc<Shared>, index: usize) {
    CURRENT.with(|c| c.set(Arc::as_ptr(&shared)));
    if shared.jitter {
        RNG.with(|c| c.set(0x2545_f491_4f6c_dd1d ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9)));
    }
    while let Some(r) = shared.next() {
        if shared.jitter {
            jitter();
        }
        match r {
            Runnable::Closure(f) => f(),
            Runnable::Node(mut task, ev) => {
                let wait = task.node.on_event(ev, &shared);
                shared.park(task, wait);
            }
        }
    }
}

/// A running worker pool together with the message network its tasks use.
pub struct Pool {
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl Pool {
    pub fn new(
        workers: usize,
        table: Arc<RelationTable>,
        trace: Option<Arc<dyn TraceSink>>,
        jitter: bool,
    ) -> Pool {
        let shared = Arc::new(Shared {
            net: Net::new(None, trace),
            table,
            queue: Injector::new(),
            sleep_lock: Mutex::new(()),
            wake: Condvar::new(),
            sleepers: AtomicUsize::new(0),
            shutdown: AtomicBool::new(false),
            live: AtomicUsize::new(0),
            spawned: AtomicUsize::new(0),
            jitter,
        });
        let workers = (0..workers.max(1))
            .map(|i| {
                let s = shared.clone();
                thread::Builder::new()
                    .name(format!("kanren-worker-{i}"))
                    .spawn(move || worker(s, i))
                    .expect("failed to spawn a pool worker")
            })
            .collect();
        Pool { shared, workers }
    }

    pub fn net(&self) -> &Net {
        &self.shared.net
    }

    pub fn workers(&self) -> usize {
        self.workers.len()
    }

    /// Runs `f` on some worker.
    pub fn spawn(&self, f: impl FnOnce() + Send + 'static) {
        self.shared.schedule(Runnable::Closure(Box::new(f)));
    }

    /// Runs `k` on a worker once `handle` receives a request or `Done`.
    pub fn suspend_on_request(
        &self,
        handle: &StreamHandle,
        k: impl FnOnce(Inbound) + Send + 'static,
    ) {
        let shared = self.shared.clone();
        handle.requests().park(Box::new(move |msg: Inbound| {
            shared.schedule(Runnable::Closure(Box::new(move || k(msg))));
        }));
    }

    /// Runs `k` on a worker once a reply arrives in `handle`'s inbox.
    pub fn suspend_on_result(
        &self,
        handle: &StreamHandle,
        k: impl FnOnce(Envelope) + Send + 'static,
    ) {
        let shared = self.shared.clone();
        handle.inbox().park(Box::new(move |msg: Envelope| {
            shared.schedule(Runnable::Closure(Box::new(move || k(msg))));
        }));
    }

    pub fn apply(&self, goal: &GoalExpr, st: State) -> StreamHandle {
        node::apply(goal, st, &self.shared)
    }

    pub fn take(&self, top: StreamHandle, limit: Limit) -> Vec<State> {
        node::take(&self.shared.net, top, limit)
    }

    /// Stream processes that have not halted yet.
    pub fn live(&self) -> usize {
        self.shared.live.load(Ordering::Acquire)
    }

    pub fn spawned(&self) -> usize {
        self.shared.spawned.load(Ordering::Relaxed)
    }

    /// Waits for every process to halt; returns how many are left at the deadline.
    pub fn quiesce(&self, timeout: Duration) -> usize {
        wait_for_zero(&self.shared.live, timeout)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        {
            let _g = self.shared.sleep_lock.lock().expect("pool lock poisoned");
            self.shared.wake.notify_all();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        self.stop();
    }
}

#[derive(Clone)]
pub struct PoolEngine {
    workers: usize,
    trace: Option<Arc<dyn TraceSink>>,
    jitter: bool,
    quiesce_timeout: Duration,
}

impl Default for PoolEngine {
    fn default() -> Self {
        PoolEngine::new(thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl PoolEngine {
    pub fn new(workers: usize) -> PoolEngine {
        PoolEngine {
            workers: workers.max(1),
            trace: None,
            jitter: false,
            quiesce_timeout: Duration::from_secs(10),
        }
    }

    pub fn with_trace(mut self, sink: Arc<dyn TraceSink>) -> PoolEngine {
        self.trace = Some(sink);
        self
    }

    /// Randomly yields and sleeps between tasks to shake out ordering bugs.
    pub fn with_jitter(mut self, on: bool) -> PoolEngine {
        self.jitter = on;
        self
    }

    pub fn with_quiesce_timeout(mut self, t: Duration) -> PoolEngine {
        self.quiesce_timeout = t;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn solve_with_stats(
        &self,
        goal: &GoalExpr,
        init: State,
        table: &Arc<RelationTable>,
        limit: Limit,
    ) -> Result<(Vec<State>, RunStats), EngineError> {
        table.validate(goal)?;
        let pool = Pool::new(self.workers, table.clone(), self.trace.clone(), self.jitter);
        let top = pool.apply(goal, init);
        let answers = pool.take(top, limit);
        let leaked = pool.quiesce(self.quiesce_timeout);
        let stats = RunStats {
            spawned: pool.spawned(),
            leaked,
        };
        pool.shutdown();
        Ok((answers, stats))
    }
}

impl Engine for PoolEngine {
    fn name(&self) -> String {
        format!("pool({})", self.workers)
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
                "{} stream tasks still parked after the query",
                stats.leaked
            )));
        }
        Ok(answers)
    }
}
