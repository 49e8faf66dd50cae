use serde::{Deserialize, Serialize};

use crate::domain::UtcTimestamp;

use super::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    SleepEnter,
    Wake,
    Boot,
}

/// An entry from the host's power event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemEvent {
    pub ts: UtcTimestamp,
    pub kind: EventKind,
}

impl SystemEvent {
    pub fn new(ts: UtcTimestamp, kind: EventKind) -> Self {
        SystemEvent { ts, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    /// Ended by a wake.
    Sleep,
    /// Ended by a boot: the machine went down while suspended.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub kind: SpanKind,
    pub start: UtcTimestamp,
    pub end: UtcTimestamp,
}

/// Closed spans from a time-ordered event log, plus the start of a trailing
/// unmatched `SleepEnter`.
pub fn sleep_spans(events: &[SystemEvent]) -> (Vec<Span>, Option<UtcTimestamp>) {
    let mut spans = Vec::new();
    let mut pending: Option<UtcTimestamp> = None;
    for event in events {
        match (event.kind, pending) {
            (EventKind::SleepEnter, None) => pending = Some(event.ts),
            // a second SleepEnter without a wake keeps the earlier start
            (EventKind::SleepEnter, Some(_)) => {}
            (EventKind::Wake, Some(start)) => {
                spans.push(Span { kind: SpanKind::Sleep, start, end: event.ts });
                pending = None;
            }
            (EventKind::Boot, Some(start)) => {
                spans.push(Span { kind: SpanKind::Off, start, end: event.ts });
                pending = None;
            }
            (EventKind::Wake | EventKind::Boot, None) => {}
        }
    }
    (spans, pending)
}

/// Seconds asleep and off inside a window, as derived from the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SleepAttribution {
    pub sleep_secs: u64,
    pub off_secs: u64,
    /// An unmatched `SleepEnter`; its time is attributed once the span closes.
    pub open_since: Option<UtcTimestamp>,
}

pub fn derive_sleep(events: &[SystemEvent], window: Window) -> SleepAttribution {
    let (spans, pending) = sleep_spans(events);
    let mut out = SleepAttribution::default();
    for span in spans {
        let secs = window.overlap_secs(span.start, span.end);
        match span.kind {
            SpanKind::Sleep => out.sleep_secs += secs,
            SpanKind::Off => out.off_secs += secs,
        }
    }
    out.open_since = pending.filter(|start| *start < window.end);
    out
}
