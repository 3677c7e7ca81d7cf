//! Messages exchanged between stream processes, and the mailboxes that carry them.
//!
//! Every stream has two mailboxes: one for requests coming from whoever
//! currently consumes the stream, and an inbox for replies coming from the
//! streams it consumes. A consumer sends `Request` and then waits for exactly
//! one reply. `Done` tells a stream that nobody will ask it again.

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use kanren_core::State;

use crate::trace::TraceSink;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId(pub u64);

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Debug for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The eight message kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Request,
    Done,
    State,
    StateAndClose,
    Close,
    Forward,
    ForwardWithState,
    Delay,
}

impl Tag {
    pub const ALL: [Tag; 8] = [
        Tag::Request,
        Tag::Done,
        Tag::State,
        Tag::StateAndClose,
        Tag::Close,
        Tag::Forward,
        Tag::ForwardWithState,
        Tag::Delay,
    ];

    pub fn meaning(self) -> &'static str {
        match self {
            Tag::Request => "Request a result",
            Tag::Done => "Signal no more request will be coming",
            Tag::State => "Result found, more might be available",
            Tag::StateAndClose => "Result found, no more available",
            Tag::Close => "No result, no more available",
            Tag::Forward => "Result may be found on other stream",
            Tag::ForwardWithState => "Result found, further results on other stream",
            Tag::Delay => "Immature stream",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Request => "Request",
            Tag::Done => "Done",
            Tag::State => "State",
            Tag::StateAndClose => "StateAndClose",
            Tag::Close => "Close",
            Tag::Forward => "Forward",
            Tag::ForwardWithState => "ForwardWithState",
            Tag::Delay => "Delay",
        }
    }

    /// Replies after which the sender is gone from the message path.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            Tag::StateAndClose | Tag::Close | Tag::Forward | Tag::ForwardWithState
        )
    }

    pub fn is_reply(self) -> bool {
        !matches!(self, Tag::Request | Tag::Done)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Messages arriving on a stream's request mailbox.
#[derive(Clone, Debug)]
pub enum Inbound {
    Request { sender: StreamHandle },
    Done,
}

/// Result messages, sent from a stream to whoever requested from it.
#[derive(Clone, Debug)]
pub enum Reply {
    State(State),
    StateAndClose(State),
    Close,
    Forward(StreamHandle),
    ForwardWithState(StreamHandle, State),
    Delay,
}

impl Reply {
    pub fn tag(&self) -> Tag {
        match self {
            Reply::State(_) => Tag::State,
            Reply::StateAndClose(_) => Tag::StateAndClose,
            Reply::Close => Tag::Close,
            Reply::Forward(_) => Tag::Forward,
            Reply::ForwardWithState(..) => Tag::ForwardWithState,
            Reply::Delay => Tag::Delay,
        }
    }

    pub fn state(&self) -> Option<&State> {
        match self {
            Reply::State(st) | Reply::StateAndClose(st) | Reply::ForwardWithState(_, st) => {
                Some(st)
            }
            _ => None,
        }
    }
}

/// A reply together with the stream that sent it.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub from: StreamId,
    pub reply: Reply,
}

/// Something that can be woken with a message of type `T`.
///
/// Parked pool tasks implement this; resuming must not block.
pub trait Resume<T>: Send {
    fn resume(self: Box<Self>, msg: T);
}

impl<T, F> Resume<T> for F
where
    F: FnOnce(T) + Send,
{
    fn resume(self: Box<Self>, msg: T) {
        (*self)(msg)
    }
}

struct Slots<T> {
    queue: VecDeque<T>,
    parked: Option<Box<dyn Resume<T>>>,
}

/// FIFO mailbox supporting both blocking receive and task parking.
///
/// With a capacity, senders block while the queue is full. Parking is only
/// meant for unbounded mailboxes, since a parked task can never make a sender
/// wait.
pub struct Mailbox<T> {
    slots: Mutex<Slots<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: Option<usize>,
}

impl<T: Send> Mailbox<T> {
    pub fn new(capacity: Option<usize>) -> Mailbox<T> {
        Mailbox {
            slots: Mutex::new(Slots {
                queue: VecDeque::new(),
                parked: None,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            capacity,
        }
    }

    pub fn send(&self, msg: T) {
        let mut slots = self.slots.lock().expect("mailbox poisoned");
        if let Some(task) = slots.parked.take() {
            drop(slots);
            task.resume(msg);
            return;
        }
        if let Some(cap) = self.capacity {
            while slots.queue.len() >= cap {
                slots = self.not_full.wait(slots).expect("mailbox poisoned");
            }
        }
        slots.queue.push_back(msg);
        drop(slots);
        self.not_empty.notify_one();
    }

    /// Blocks until a message is available.
    pub fn recv(&self) -> T {
        let mut slots = self.slots.lock().expect("mailbox poisoned");
        loop {
            if let Some(msg) = slots.queue.pop_front() {
                drop(slots);
                self.not_full.notify_one();
                return msg;
            }
            slots = self.not_empty.wait(slots).expect("mailbox poisoned");
        }
    }

    pub fn try_recv(&self) -> Option<T> {
        let msg = self
            .slots
            .lock()
            .expect("mailbox poisoned")
            .queue
            .pop_front();
        if msg.is_some() {
            self.not_full.notify_one();
        }
        msg
    }

    /// Resumes `task` with the next message: immediately if one is queued,
    /// otherwise when it arrives.
    ///
    /// Panics if another task is already parked here.
    pub fn park(&self, task: Box<dyn Resume<T>>) {
        let mut slots = self.slots.lock().expect("mailbox poisoned");
        if let Some(msg) = slots.queue.pop_front() {
            drop(slots);
            self.not_full.notify_one();
            task.resume(msg);
            return;
        }
        assert!(slots.parked.is_none(), "two tasks parked on one mailbox");
        slots.parked = Some(task);
    }

    pub fn is_parked(&self) -> bool {
        self.slots
            .lock()
            .expect("mailbox poisoned")
            .parked
            .is_some()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("mailbox poisoned").queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct StreamCore {
    pub id: StreamId,
    pub requests: Mailbox<Inbound>,
    pub inbox: Mailbox<Envelope>,
    awaiting_reply: AtomicBool,
    done: AtomicBool,
    finished: AtomicBool,
}

/// Shared handle to one stream.
#[derive(Clone)]
pub struct StreamHandle(Arc<StreamCore>);

impl StreamHandle {
    pub fn id(&self) -> StreamId {
        self.0.id
    }

    pub fn requests(&self) -> &Mailbox<Inbound> {
        &self.0.requests
    }

    pub fn inbox(&self) -> &Mailbox<Envelope> {
        &self.0.inbox
    }

    /// True once this stream has sent a terminal reply.
    pub fn is_finished(&self) -> bool {
        self.0.finished.load(Ordering::Acquire)
    }
}

impl PartialEq for StreamHandle {
    fn eq(&self, other: &Self) -> bool {
        self.id() == other.id()
    }
}

impl Eq for StreamHandle {}

impl fmt::Debug for StreamHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("{child} already has an unanswered request")]
    DuplicateRequest { child: StreamId },
    #[error("request to {child} after it was sent done")]
    RequestAfterDone { child: StreamId },
    #[error("request to {child} after its final reply")]
    RequestAfterFinish { child: StreamId },
}

/// Creates streams and sends messages between them, tracing each one.
pub struct Net {
    next_id: AtomicU64,
    capacity: Option<usize>,
    trace: Option<Arc<dyn TraceSink>>,
}

impl Net {
    /// `capacity` bounds every mailbox; `None` makes them unbounded.
    pub fn new(capacity: Option<usize>, trace: Option<Arc<dyn TraceSink>>) -> Net {
        Net {
            next_id: AtomicU64::new(0),
            capacity,
            trace,
        }
    }

    pub fn new_stream(&self) -> StreamHandle {
        let id = StreamId(self.next_id.fetch_add(1, Ordering::Relaxed));
        StreamHandle(Arc::new(StreamCore {
            id,
            requests: Mailbox::new(self.capacity),
            inbox: Mailbox::new(self.capacity),
            awaiting_reply: AtomicBool::new(false),
            done: AtomicBool::new(false),
            finished: AtomicBool::new(false),
        }))
    }

    fn record(&self, src: StreamId, dst: StreamId, tag: Tag) {
        if let Some(t) = &self.trace {
            t.record(src, dst, tag);
        }
    }

    /// Asks `child` for its next result, to be delivered to `reply_to`'s inbox.
    pub fn request(
        &self,
        child: &StreamHandle,
        reply_to: &StreamHandle,
    ) -> Result<(), ProtocolError> {
        let core = &child.0;
        if core.done.load(Ordering::Acquire) {
            return Err(ProtocolError::RequestAfterDone { child: core.id });
        }
        if core.finished.load(Ordering::Acquire) {
            return Err(ProtocolError::RequestAfterFinish { child: core.id });
        }
        if core.awaiting_reply.swap(true, Ordering::AcqRel) {
            return Err(ProtocolError::DuplicateRequest { child: core.id });
        }
        self.record(reply_to.id(), core.id, Tag::Request);
        core.requests.send(Inbound::Request {
            sender: reply_to.clone(),
        });
        Ok(())
    }

    pub fn send_done(&self, from: StreamId, child: &StreamHandle) {
        child.0.done.store(true, Ordering::Release);
        self.record(from, child.id(), Tag::Done);
        child.0.requests.send(Inbound::Done);
    }

    /// Sends `me`'s reply to the stream that requested it.
    pub fn publish(&self, me: &StreamHandle, to: &StreamHandle, reply: Reply) {
        let tag = reply.tag();
        if tag.is_terminal() {
            me.0.finished.store(true, Ordering::Release);
        }
        me.0.awaiting_reply.store(false, Ordering::Release);
        self.record(me.id(), to.id(), tag);
        to.0.inbox.send(Envelope {
            from: me.id(),
            reply,
        });
    }

    pub fn is_tracing(&self) -> bool {
        self.trace.is_some()
    }
}
