//! Nodes for the two goal forms that exploit parallelism: the fair n-ary
//! disjunction `disj+c` and the short-circuiting conjunction `conj-sce`.

use std::collections::VecDeque;

use kanren_core::State;

use crate::node::{Io, Wait};
use crate::protocol::{Reply, StreamHandle, StreamId};

/// `mplusplus`: asks every live branch at once and serves the collected
/// answers in branch order before asking again.
pub struct MplusPlus {
    active: Vec<(usize, StreamHandle)>,
    buffer: VecDeque<State>,
    round: Vec<(usize, State)>,
    outstanding: usize,
}

impl MplusPlus {
    pub fn new(children: Vec<StreamHandle>) -> MplusPlus {
        MplusPlus {
            active: children.into_iter().enumerate().collect(),
            buffer: VecDeque::new(),
            round: Vec::new(),
            outstanding: 0,
        }
    }

    pub fn on_request(&mut self, io: &Io) -> Wait {
        if !self.buffer.is_empty() {
            return self.serve(io);
        }
        if self.active.is_empty() {
            io.reply(Reply::Close);
            return Wait::Halt;
        }
        self.outstanding = self.active.len();
        for (_, child) in &self.active {
            io.ask(child);
        }
        Wait::Reply
    }

    pub fn on_reply(&mut self, from: StreamId, reply: Reply, io: &Io) -> Wait {
        let pos = self
            .active
            .iter()
            .position(|(_, h)| h.id() == from)
            .expect("reply from a branch that is not active");
        let idx = self.active[pos].0;
        match reply {
            Reply::State(st) => self.round.push((idx, st)),
            Reply::StateAndClose(st) => {
                self.round.push((idx, st));
                self.active.remove(pos);
            }
            Reply::Close => {
                self.active.remove(pos);
            }
            Reply::ForwardWithState(f, st) => {
                self.round.push((idx, st));
                self.active[pos].1 = f;
            }
            Reply::Forward(f) => {
                io.ask(&f);
                self.active[pos].1 = f;
                return Wait::Reply;
            }
            Reply::Delay => {}
        }
        self.outstanding -= 1;
        if self.outstanding > 0 {
            return Wait::Reply;
        }
        self.round.sort_by_key(|(i, _)| *i);
        self.buffer.extend(self.round.drain(..).map(|(_, st)| st));
        if !self.buffer.is_empty() {
            self.serve(io)
        } else if self.active.is_empty() {
            io.reply(Reply::Close);
            Wait::Halt
        } else {
            io.reply(Reply::Delay);
            Wait::Request
        }
    }

    fn serve(&mut self, io: &Io) -> Wait {
        let st = self.buffer.pop_front().expect("serve with an empty buffer");
        if self.buffer.is_empty() && self.active.is_empty() {
            io.reply(Reply::StateAndClose(st));
            Wait::Halt
        } else {
            io.reply(Reply::State(st));
            Wait::Request
        }
    }

    pub fn on_done(&mut self, io: &Io) {
        for (_, child) in &self.active {
            io.done(child);
        }
    }
}

enum Phase {
    Idle,
    Racing,
    AwaitWhole,
    Draining(StreamHandle),
}

/// `shortCircuit` for `(conj-sce a b)`: runs `(conj a b)` alongside `b`
/// alone, and answers `Close` as soon as `b` by itself is known to fail.
pub struct ShortCircuit {
    whole: StreamHandle,
    probe: StreamHandle,
    phase: Phase,
}

impl ShortCircuit {
    pub fn new(whole: StreamHandle, probe: StreamHandle) -> ShortCircuit {
        ShortCircuit {
            whole,
            probe,
            phase: Phase::Idle,
        }
    }

    pub fn on_request(&mut self, io: &Io) -> Wait {
        debug_assert!(matches!(self.phase, Phase::Idle));
        io.ask(&self.whole);
        io.ask(&self.probe);
        self.phase = Phase::Racing;
        Wait::Reply
    }

    pub fn on_done(&mut self, io: &Io) {
        io.done(&self.whole);
        io.done(&self.probe);
    }

    pub fn on_reply(&mut self, from: StreamId, reply: Reply, io: &Io) -> Wait {
        match std::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Racing if from == self.whole.id() => match reply {
                Reply::Forward(f) => {
                    self.whole = f;
                    self.rearm_whole(io)
                }
                Reply::Delay => self.rearm_whole(io),
                other => {
                    self.hand_off(other, io);
                    self.phase = Phase::Draining(self.probe.clone());
                    Wait::Reply
                }
            },
            Phase::Racing => {
                debug_assert_eq!(from, self.probe.id());
                match reply {
                    Reply::Forward(f) => {
                        self.probe = f;
                        io.ask(&self.probe);
                        self.phase = Phase::Racing;
                        Wait::Reply
                    }
                    Reply::Delay => {
                        io.ask(&self.probe);
                        self.phase = Phase::Racing;
                        Wait::Reply
                    }
                    Reply::Close => {
                        io.reply(Reply::Close);
                        self.phase = Phase::Draining(self.whole.clone());
                        Wait::Reply
                    }
                    // `b` has an answer, so the conjunction is not
                    // short-circuited; only `(conj a b)` matters from here.
                    Reply::State(_) => {
                        io.done(&self.probe);
                        self.phase = Phase::AwaitWhole;
                        Wait::Reply
                    }
                    Reply::ForwardWithState(f, _) => {
                        io.done(&f);
                        self.phase = Phase::AwaitWhole;
                        Wait::Reply
                    }
                    Reply::StateAndClose(_) => {
                        self.phase = Phase::AwaitWhole;
                        Wait::Reply
                    }
                }
            }
            Phase::AwaitWhole => {
                debug_assert_eq!(from, self.whole.id());
                self.hand_off(reply, io);
                Wait::Halt
            }
            Phase::Draining(h) => {
                debug_assert_eq!(from, h.id());
                match reply {
                    Reply::State(_) | Reply::Delay => io.done(&h),
                    Reply::Forward(f) | Reply::ForwardWithState(f, _) => io.done(&f),
                    Reply::Close | Reply::StateAndClose(_) => {}
                }
                Wait::Halt
            }
            Phase::Idle => unreachable!("reply while idle"),
        }
    }

    fn rearm_whole(&mut self, io: &Io) -> Wait {
        io.ask(&self.whole);
        self.phase = Phase::Racing;
        Wait::Reply
    }

    /// Passes the conjunction's reply up, replacing this node by it.
    fn hand_off(&self, reply: Reply, io: &Io) {
        let r = match reply {
            Reply::State(st) => Reply::ForwardWithState(self.whole.clone(), st),
            Reply::Delay => Reply::Forward(self.whole.clone()),
            other => other,
        };
        io.reply(r);
    }
}
