//! Message tracing and an offline checker for the request/reply discipline.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::sync::Mutex;

use crate::protocol::{StreamId, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: u64,
    pub src: StreamId,
    pub dst: StreamId,
    pub tag: Tag,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} -> {} {}",
            self.tick, self.src.0, self.dst.0, self.tag
        )
    }
}

/// Receives one call per message, before the message is enqueued.
pub trait TraceSink: Send + Sync {
    fn record(&self, src: StreamId, dst: StreamId, tag: Tag);
}

/// Keeps every event in memory, in send order.
#[derive(Default)]
pub struct MemoryTrace {
    events: Mutex<Vec<TraceEvent>>,
}

impl MemoryTrace {
    pub fn new() -> MemoryTrace {
        MemoryTrace::default()
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("trace poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TraceSink for MemoryTrace {
    fn record(&self, src: StreamId, dst: StreamId, tag: Tag) {
        let mut events = self.events.lock().expect("trace poisoned");
        let tick = events.len() as u64;
        events.push(TraceEvent {
            tick,
            src,
            dst,
            tag,
        });
    }
}

/// Writes `<tick> <src-id> -> <dst-id> <tag>` lines.
pub struct WriterTrace {
    out: Mutex<(u64, Box<dyn Write + Send>)>,
}

impl WriterTrace {
    pub fn new(out: Box<dyn Write + Send>) -> WriterTrace {
        WriterTrace {
            out: Mutex::new((0, out)),
        }
    }

    pub fn stderr() -> WriterTrace {
        WriterTrace::new(Box::new(std::io::stderr()))
    }
}

impl TraceSink for WriterTrace {
    fn record(&self, src: StreamId, dst: StreamId, tag: Tag) {
        let mut guard = self.out.lock().expect("trace poisoned");
        let tick = guard.0;
        guard.0 += 1;
        let ev = TraceEvent {
            tick,
            src,
            dst,
            tag,
        };
        // Tracing is diagnostic; a closed pipe should not take the engine down.
        let _ = writeln!(guard.1, "{ev}");
    }
}

#[derive(Debug, Default, Clone)]
pub struct TraceReport {
    pub events: usize,
    pub requests: usize,
    pub replies: usize,
    pub streams: usize,
    pub violations: Vec<String>,
}

impl TraceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a trace against the protocol rules:
///
/// * a stream has at most one unanswered request at a time, and every reply
///   answers one;
/// * nothing is requested from a stream after it was sent `Done` or after it
///   sent a terminal reply (`Close`, `StateAndClose`, `Forward`,
///   `ForwardWithState`);
/// * after a terminal reply a stream sends no further replies or requests;
///   only `Done` to streams it still holds is allowed;
/// * `Done` is never sent to a stream that owes a reply.
pub fn check_trace(events: &[TraceEvent]) -> TraceReport {
    let mut report = TraceReport {
        events: events.len(),
        ..TraceReport::default()
    };
    let mut owes: HashMap<StreamId, StreamId> = HashMap::new();
    let mut done: HashSet<StreamId> = HashSet::new();
    let mut finished: HashSet<StreamId> = HashSet::new();
    let mut seen: HashSet<StreamId> = HashSet::new();
    let mut bad = |msg: String| report.violations.push(msg);

    for ev in events {
        seen.insert(ev.src);
        seen.insert(ev.dst);
        match ev.tag {
            Tag::Request => {
                report.requests += 1;
                if finished.contains(&ev.src) {
                    bad(format!("{ev}: finished stream sends a request"));
                }
                if let Some(parent) = owes.get(&ev.dst) {
                    bad(format!(
                        "{ev}: {} still owes {} a reply",
                        ev.dst.0, parent.0
                    ));
                }
                if done.contains(&ev.dst) {
                    bad(format!("{ev}: request after done"));
                }
                if finished.contains(&ev.dst) {
                    bad(format!("{ev}: request after final reply"));
                }
                owes.insert(ev.dst, ev.src);
            }
            Tag::Done => {
                if owes.contains_key(&ev.dst) {
                    bad(format!("{ev}: done sent while a reply is owed"));
                }
                if finished.contains(&ev.dst) {
                    bad(format!("{ev}: done sent to a finished stream"));
                }
                if !done.insert(ev.dst) {
                    bad(format!("{ev}: done sent twice"));
                }
            }
            reply => {
                report.replies += 1;
                if finished.contains(&ev.src) {
                    bad(format!("{ev}: reply after final reply"));
                }
                match owes.remove(&ev.src) {
                    Some(parent) if parent == ev.dst => {}
                    Some(parent) => bad(format!("{ev}: reply owed to {} instead", parent.0)),
                    None => bad(format!("{ev}: reply without a request")),
                }
                if reply.is_terminal() {
                    finished.insert(ev.src);
                }
            }
        }
    }
    report.streams = seen.len();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(tick: u64, src: u64, dst: u64, tag: Tag) -> TraceEvent {
        TraceEvent {
            tick,
            src: StreamId(src),
            dst: StreamId(dst),
            tag,
        }
    }

    #[test]
    fn clean_exchange() {
        let trace = [
            ev(0, 0, 1, Tag::Request),
            ev(1, 1, 2, Tag::Request),
            ev(2, 2, 1, Tag::StateAndClose),
            ev(3, 1, 0, Tag::ForwardWithState),
        ];
        let r = check_trace(&trace);
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!((r.requests, r.replies, r.streams), (2, 2, 3));
    }

    #[test]
    fn double_request_is_flagged() {
        let trace = [ev(0, 0, 1, Tag::Request), ev(1, 0, 1, Tag::Request)];
        assert_eq!(check_trace(&trace).violations.len(), 1);
    }

    #[test]
    fn reply_after_close_is_flagged() {
        let trace = [
            ev(0, 0, 1, Tag::Request),
            ev(1, 1, 0, Tag::Close),
            ev(2, 1, 0, Tag::State),
        ];
        let r = check_trace(&trace);
        assert!(r.violations.iter().any(|v| v.contains("after final reply")));
    }

    #[test]
    fn request_after_done_is_flagged() {
        let trace = [
            ev(0, 0, 1, Tag::Request),
            ev(1, 1, 0, Tag::State),
            ev(2, 0, 1, Tag::Done),
            ev(3, 0, 1, Tag::Request),
        ];
        assert!(!check_trace(&trace).is_clean());
    }

    #[test]
    fn forwarded_stream_must_stay_silent() {
        let trace = [
            ev(0, 0, 1, Tag::Request),
            ev(1, 1, 0, Tag::Forward),
            ev(2, 1, 5, Tag::Request),
        ];
        assert!(!check_trace(&trace).is_clean());
    }

    #[test]
    fn memory_trace_ticks_in_order() {
        let t = MemoryTrace::new();
        t.record(StreamId(0), StreamId(1), Tag::Request);
        t.record(StreamId(1), StreamId(0), Tag::Close);
        let evs = t.events();
        assert_eq!(evs[1].tick, 1);
        assert_eq!(evs[0].to_string(), "0 0 -> 1 Request");
    }

    #[test]
    fn writer_trace_format() {
        #[derive(Clone, Default)]
        struct Buf(std::sync::Arc<Mutex<Vec<u8>>>);
        impl Write for Buf {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let buf = Buf::default();
        let t = WriterTrace::new(Box::new(buf.clone()));
        t.record(StreamId(3), StreamId(4), Tag::Delay);
        t.record(StreamId(4), StreamId(3), Tag::Request);
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text, "0 3 -> 4 Delay\n1 4 -> 3 Request\n");
    }
}
