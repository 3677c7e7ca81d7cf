//! Concurrent evaluators for `kanren-core` goal programs.
//!
//! Every goal becomes a tree of stream processes that answer requests with the
//! messages in [`protocol::Reply`]. [`ActorEngine`] gives each process its own
//! thread; [`PoolEngine`] runs them as tasks on a fixed set of workers.

pub mod actor;
mod ext;
mod node;
pub mod pool;
pub mod protocol;
pub mod trace;

pub use actor::ActorEngine;
pub use pool::{Pool, PoolEngine};
pub use protocol::{Envelope, Inbound, Net, Reply, StreamHandle, StreamId, Tag};
pub use trace::{check_trace, MemoryTrace, TraceEvent, TraceReport, TraceSink, WriterTrace};

/// Bookkeeping from one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Stream processes started.
    pub spawned: usize,
    /// Processes still alive once the answers were collected.
    pub leaked: usize,
}
