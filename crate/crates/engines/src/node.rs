//! Stream processes as state machines.
//!
//! Each node owns one stream and reacts to one event at a time: a request or
//! `Done` from its consumer, or a reply from one of its children. After every
//! event it says what it waits for next. The actor engine runs each machine on
//! its own thread with blocking receives; the pool engine parks it as a task.
//!
//! The per-event rules mirror the reference evaluator step for step: a reply
//! to one request is the next step of the corresponding lazy stream, so answer
//! order matches the baseline for programs without `disj+c` and `conj-sce`.

use std::sync::Arc;

use kanren_core::goal::{DelayThunk, GoalExpr};
use kanren_core::{Limit, RelationTable, State, Term};

use crate::ext::{MplusPlus, ShortCircuit};
use crate::protocol::{Envelope, Inbound, Net, Reply, StreamHandle, StreamId};

pub enum Event {
    Request(StreamHandle),
    Done,
    Reply(StreamId, Reply),
}

impl From<Inbound> for Event {
    fn from(msg: Inbound) -> Event {
        match msg {
            Inbound::Request { sender } => Event::Request(sender),
            Inbound::Done => Event::Done,
        }
    }
}

impl From<Envelope> for Event {
    fn from(env: Envelope) -> Event {
        Event::Reply(env.from, env.reply)
    }
}

/// What a node waits for after handling an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wait {
    Request,
    Reply,
    Halt,
}

/// Services an engine provides to its nodes.
pub trait Runtime {
    fn net(&self) -> &Net;
    fn table(&self) -> &RelationTable;
    /// Starts `node`'s process, which first waits for a request.
    fn start(&self, node: Node);
}

/// Messaging helpers bound to one node and its current consumer.
pub struct Io<'a> {
    pub me: &'a StreamHandle,
    pub parent: Option<&'a StreamHandle>,
    pub rt: &'a dyn Runtime,
}

impl Io<'_> {
    pub fn reply(&self, r: Reply) {
        let parent = self.parent.expect("reply without a pending request");
        self.rt.net().publish(self.me, parent, r);
    }

    pub fn ask(&self, child: &StreamHandle) {
        self.rt
            .net()
            .request(child, self.me)
            .unwrap_or_else(|e| panic!("protocol violation in {:?}: {e}", self.me));
    }

    pub fn done(&self, child: &StreamHandle) {
        self.rt.net().send_done(self.me.id(), child);
    }

    pub fn apply(&self, goal: &GoalExpr, st: State) -> StreamHandle {
        apply(goal, st, self.rt)
    }
}

pub enum Kind {
    Unify {
        u: Term,
        v: Term,
        st: State,
    },
    Mplus {
        first: StreamHandle,
        second: StreamHandle,
    },
    Bind {
        src: StreamHandle,
        goal: Arc<GoalExpr>,
    },
    Delay {
        thunk: DelayThunk,
        st: Option<State>,
        stepped: bool,
    },
    DisjConc(MplusPlus),
    ShortCircuit(ShortCircuit),
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Unify { .. } => "equalo",
            Kind::Mplus { .. } => "mplus",
            Kind::Bind { .. } => "bind",
            Kind::Delay { .. } => "delay",
            Kind::DisjConc(_) => "disjconc",
            Kind::ShortCircuit(_) => "conjsce",
        }
    }
}

pub struct Node {
    pub me: StreamHandle,
    parent: Option<StreamHandle>,
    pub kind: Kind,
}

impl Node {
    pub fn new(me: StreamHandle, kind: Kind) -> Node {
        Node {
            me,
            parent: None,
            kind,
        }
    }

    pub fn on_event(&mut self, ev: Event, rt: &dyn Runtime) -> Wait {
        if let Event::Request(sender) = &ev {
            self.parent = Some(sender.clone());
        }
        let io = Io {
            me: &self.me,
            parent: self.parent.as_ref(),
            rt,
        };
        match ev {
            Event::Request(_) => on_request(&mut self.kind, &io),
            Event::Done => on_done(&mut self.kind, &io),
            Event::Reply(from, reply) => on_reply(&mut self.kind, from, reply, &io),
        }
    }
}

fn on_request(kind: &mut Kind, io: &Io) -> Wait {
    match kind {
        Kind::Unify { u, v, st } => {
            match st.unify(u, v) {
                Some(next) => io.reply(Reply::StateAndClose(next)),
                None => io.reply(Reply::Close),
            }
            Wait::Halt
        }
        Kind::Mplus { first, .. } => {
            io.ask(first);
            Wait::Reply
        }
        Kind::Bind { src, .. } => {
            io.ask(src);
            Wait::Reply
        }
        // The first request only learns that the stream is immature; the
        // second builds the goal and hands the stream over.
        Kind::Delay { thunk, st, stepped } => {
            if !*stepped {
                *stepped = true;
                io.reply(Reply::Delay);
                return Wait::Request;
            }
            let st = st.take().expect("delay node forwarded twice");
            let g = io.apply(&thunk(), st);
            io.reply(Reply::Forward(g));
            Wait::Halt
        }
        Kind::DisjConc(m) => m.on_request(io),
        Kind::ShortCircuit(s) => s.on_request(io),
    }
}

fn on_done(kind: &mut Kind, io: &Io) -> Wait {
    match kind {
        Kind::Unify { .. } | Kind::Delay { .. } => {}
        Kind::Mplus { first, second } => {
            io.done(first);
            io.done(second);
        }
        Kind::Bind { src, .. } => io.done(src),
        Kind::DisjConc(m) => m.on_done(io),
        Kind::ShortCircuit(s) => s.on_done(io),
    }
    Wait::Halt
}

fn on_reply(kind: &mut Kind, from: StreamId, reply: Reply, io: &Io) -> Wait {
    match kind {
        Kind::Mplus { first, second } => {
            debug_assert_eq!(from, first.id());
            match reply {
                Reply::State(st) => {
                    io.reply(Reply::State(st));
                    Wait::Request
                }
                Reply::StateAndClose(st) => {
                    io.reply(Reply::ForwardWithState(second.clone(), st));
                    Wait::Halt
                }
                Reply::Close => {
                    io.reply(Reply::Forward(second.clone()));
                    Wait::Halt
                }
                Reply::Forward(f) => {
                    *first = f;
                    io.ask(first);
                    Wait::Reply
                }
                Reply::ForwardWithState(f, st) => {
                    *first = f;
                    io.reply(Reply::State(st));
                    Wait::Request
                }
                Reply::Delay => {
                    std::mem::swap(first, second);
                    io.reply(Reply::Delay);
                    Wait::Request
                }
            }
        }
        Kind::Bind { src, goal } => {
            debug_assert_eq!(from, src.id());
            match reply {
                Reply::Close => {
                    io.reply(Reply::Close);
                    Wait::Halt
                }
                Reply::Delay => {
                    io.reply(Reply::Delay);
                    Wait::Request
                }
                Reply::Forward(f) => {
                    *src = f;
                    io.ask(src);
                    Wait::Reply
                }
                Reply::StateAndClose(st) => {
                    let g = io.apply(goal, st);
                    io.reply(Reply::Forward(g));
                    Wait::Halt
                }
                Reply::State(st) => {
                    let rest = src.clone();
                    become_mplus(kind, st, rest, io)
                }
                Reply::ForwardWithState(f, st) => become_mplus(kind, st, f, io),
            }
        }
        Kind::DisjConc(m) => m.on_reply(from, reply, io),
        Kind::ShortCircuit(s) => s.on_reply(from, reply, io),
        Kind::Unify { .. } | Kind::Delay { .. } => {
            unreachable!("{} node never requests from children", kind.name())
        }
    }
}

/// `bind` over a stream whose next step is `st` followed by `rest`:
/// `mplus(goal(st), bind(rest, goal))`, continuing the current round.
fn become_mplus(kind: &mut Kind, st: State, rest: StreamHandle, io: &Io) -> Wait {
    let Kind::Bind { goal, .. } = kind else {
        unreachable!()
    };
    let goal = goal.clone();
    let first = io.apply(&goal, st);
    let second = start(io.rt, Kind::Bind { src: rest, goal });
    io.ask(&first);
    *kind = Kind::Mplus { first, second };
    Wait::Reply
}

fn start(rt: &dyn Runtime, kind: Kind) -> StreamHandle {
    let me = rt.net().new_stream();
    rt.start(Node::new(me.clone(), kind));
    me
}

/// Applies `goal` to `st`, starting the processes for its immediate structure.
///
/// `Fresh` and relation calls are expanded in place; nothing is evaluated
/// until the returned stream receives a request.
pub fn apply(goal: &GoalExpr, st: State, rt: &dyn Runtime) -> StreamHandle {
    match goal {
        GoalExpr::Equalo(u, v) => start(
            rt,
            Kind::Unify {
                u: u.clone(),
                v: v.clone(),
                st,
            },
        ),
        GoalExpr::Disj(a, b) => {
            let first = apply(a, st.clone(), rt);
            let second = apply(b, st, rt);
            start(rt, Kind::Mplus { first, second })
        }
        GoalExpr::Conj(a, b) => {
            let src = apply(a, st, rt);
            start(
                rt,
                Kind::Bind {
                    src,
                    goal: b.clone(),
                },
            )
        }
        GoalExpr::DisjConc(goals) => {
            let children = goals.iter().map(|g| apply(g, st.clone(), rt)).collect();
            start(rt, Kind::DisjConc(MplusPlus::new(children)))
        }
        GoalExpr::ConjSce(a, b) => {
            let whole = apply(&GoalExpr::Conj(a.clone(), b.clone()), st.clone(), rt);
            let probe = apply(b, st, rt);
            start(rt, Kind::ShortCircuit(ShortCircuit::new(whole, probe)))
        }
        GoalExpr::Fresh(body) => {
            let (v, next) = st.fresh();
            apply(&body(Term::Var(v)), next, rt)
        }
        GoalExpr::Delay(thunk) => start(
            rt,
            Kind::Delay {
                thunk: thunk.clone(),
                st: Some(st),
                stepped: false,
            },
        ),
        GoalExpr::Call(name, args) => {
            let body = rt
                .table()
                .resolve(*name, args)
                .unwrap_or_else(|e| panic!("unvalidated program: {e}"));
            apply(&body, st, rt)
        }
    }
}

/// Pulls answers from `top` until `limit` is reached or the stream closes,
/// then tells whatever stream is still live that it is done.
pub fn take(net: &Net, top: StreamHandle, limit: Limit) -> Vec<State> {
    let root = net.new_stream();
    let mut current = Some(top);
    let mut answers = Vec::new();
    while let Some(stream) = current.take() {
        if limit.reached(answers.len()) {
            net.send_done(root.id(), &stream);
            break;
        }
        net.request(&stream, &root)
            .unwrap_or_else(|e| panic!("protocol violation at the root: {e}"));
        let Envelope { from, reply } = root.inbox().recv();
        debug_assert_eq!(from, stream.id());
        current = match reply {
            Reply::State(st) => {
                answers.push(st);
                Some(stream)
            }
            Reply::StateAndClose(st) => {
                answers.push(st);
                None
            }
            Reply::Close => None,
            Reply::Forward(f) => Some(f),
            Reply::ForwardWithState(f, st) => {
                answers.push(st);
                Some(f)
            }
            Reply::Delay => Some(stream),
        };
    }
    answers
}
