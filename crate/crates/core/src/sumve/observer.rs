//! Sources of power-state observations.
//!
//! [`SystemObserver`] is the seam where an OS binding plugs in. The crate
//! ships a trace-file observer and a seeded simulator for desk-scale runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::UtcTimestamp;

use super::{BatterySnapshot, EventKind, PowerState, SystemEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObserverError {
    #[error("power state unavailable at {0}")]
    Unavailable(UtcTimestamp),
}

pub trait SystemObserver: Send {
    /// Current state; must not block.
    fn poll(&mut self, now: UtcTimestamp) -> Result<(PowerState, BatterySnapshot), ObserverError>;

    /// Time-ordered power events recorded up to and including `until`.
    fn event_log(&self, until: UtcTimestamp) -> Vec<SystemEvent>;
}

impl<O: SystemObserver + ?Sized> SystemObserver for Box<O> {
    fn poll(&mut self, now: UtcTimestamp) -> Result<(PowerState, BatterySnapshot), ObserverError> {
        (**self).poll(now)
    }

    fn event_log(&self, until: UtcTimestamp) -> Vec<SystemEvent> {
        (**self).event_log(until)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceError {
    pub line: usize,
    pub msg: String,
}

/// Replays a recorded per-second trace. Seconds absent from the trace poll as unavailable.
#[derive(Debug, Clone, Default)]
pub struct ScriptedObserver {
    samples: BTreeMap<UtcTimestamp, (PowerState, BatterySnapshot)>,
    events: Vec<SystemEvent>,
}

impl ScriptedObserver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ts: UtcTimestamp, state: PowerState, battery: BatterySnapshot) {
        self.samples.insert(ts, (state, battery));
    }

    /// Fills `[start, start + secs)` with one state on AC power.
    pub fn fill(&mut self, start: UtcTimestamp, secs: i64, state: PowerState) {
        for i in 0..secs {
            self.push(start.add_secs(i), state, BatterySnapshot::AC_FULL);
        }
    }

    pub fn push_event(&mut self, event: SystemEvent) {
        let at = self.events.partition_point(|e| e.ts <= event.ts);
        self.events.insert(at, event);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl SystemObserver for ScriptedObserver {
    fn poll(&mut self, now: UtcTimestamp) -> Result<(PowerState, BatterySnapshot), ObserverError> {
        self.samples.get(&now).copied().ok_or(ObserverError::Unavailable(now))
    }

    fn event_log(&self, until: UtcTimestamp) -> Vec<SystemEvent> {
        self.events.iter().copied().take_while(|e| e.ts <= until).collect()
    }
}

fn parse_flag(token: &str) -> Option<bool> {
    match token {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads the plain-text trace format.
///
/// ```text
/// # timestamp        state on_ac charging
/// 03-14-22-09:00:00 sidle 1 0
/// 03-14-22-09:00:01 idle  0 0
/// 03-14-22-12:00:00 event sleepenter
/// ```
///
/// `state` is one of `off sleep idle sidle work`. `event` lines carry
/// `sleepenter`, `wake` or `boot`.
pub fn parse_trace(text: &str) -> Result<ScriptedObserver, TraceError> {
    let mut observer = ScriptedObserver::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: &str| TraceError { line, msg: msg.to_string() };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let ts = UtcTimestamp::parse_wire(tokens[0]).map_err(|_| err("bad timestamp"))?;
        match tokens.as_slice() {
            [_, "event", kind] => {
                let kind = match kind.to_ascii_lowercase().as_str() {
                    "sleepenter" => EventKind::SleepEnter,
                    "wake" => EventKind::Wake,
                    "boot" => EventKind::Boot,
                    _ => return Err(err("unknown event kind")),
                };
                observer.push_event(SystemEvent::new(ts, kind));
            }
            [_, state, on_ac, charging] => {
                let state = state.parse::<PowerState>().map_err(|_| err("unknown power state"))?;
                let on_ac = parse_flag(on_ac).ok_or_else(|| err("on_ac must be 0 or 1"))?;
                let charging = parse_flag(charging).ok_or_else(|| err("charging must be 0 or 1"))?;
                let battery = BatterySnapshot { on_ac_power: on_ac, charging: on_ac && charging, charge_pct: if charging { 50.0 } else { 100.0 } };
                observer.push(ts, state, battery);
            }
            _ => return Err(err("expected `timestamp state on_ac charging`")),
        }
    }
    Ok(observer)
}

/// A piece of a simulated schedule, starting at `start_ms` (Unix milliseconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSegment {
    pub start_ms: i64,
    pub state: PowerState,
    pub battery: BatterySnapshot,
    /// False while the host is suspended or down and cannot answer polls.
    pub observable: bool,
}

/// Piecewise-constant power-state schedule with sub-second transition times.
#[derive(Debug, Clone)]
pub struct SimulatedObserver {
    segments: Vec<TraceSegment>,
    end_ms: i64,
    events: Vec<SystemEvent>,
}

impl SimulatedObserver {
    /// Segments must be sorted by start; the last one runs until `end_ms`.
    pub fn from_segments(segments: Vec<TraceSegment>, end_ms: i64, events: Vec<SystemEvent>) -> Self {
        debug_assert!(segments.windows(2).all(|w| w[0].start_ms <= w[1].start_ms));
        SimulatedObserver { segments, end_ms, events }
    }

    pub fn constant(state: PowerState, start: UtcTimestamp, secs: i64) -> Self {
        let seg = TraceSegment { start_ms: start.unix() * 1000, state, battery: BatterySnapshot::AC_FULL, observable: true };
        Self::from_segments(vec![seg], (start.unix() + secs) * 1000, Vec::new())
    }

    /// A seeded office routine starting at local midnight `day_start`.
    ///
    /// Each day: off overnight, arrival near 08:00, a mix of work, short idle
    /// and idle blocks, a suspended lunch break bracketed by sleep/wake
    /// events, departure near 18:00. With `laptop`, some afternoon blocks run
    /// on battery and the morning starts with the battery charging.
    pub fn office_days(seed: u64, day_start: UtcTimestamp, days: u32, laptop: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut segments = Vec::new();
        let mut events = Vec::new();
        let ac = BatterySnapshot::AC_FULL;
        let push = |segments: &mut Vec<TraceSegment>, start_ms: i64, state, battery, observable| {
            segments.push(TraceSegment { start_ms, state, battery, observable });
        };
        for day in 0..days as i64 {
            let base = (day_start.unix() + day * 86_400) * 1000;
            let arrive = base + rng.random_range(7 * 3_600_000 + 1_800_000..8 * 3_600_000 + 1_800_000);
            let lunch = base + rng.random_range(12 * 3_600_000..12 * 3_600_000 + 1_800_000);
            let back = lunch + rng.random_range(1_800_000..3_600_000);
            let leave = base + rng.random_range(17 * 3_600_000 + 1_800_000..18 * 3_600_000 + 1_800_000);

            push(&mut segments, base, PowerState::Off, ac, false);
            events.push(SystemEvent::new(UtcTimestamp::from_unix(arrive.div_euclid(1000) + 1), EventKind::Boot));
            let mut t = arrive;
            let mut charging_until = if laptop { arrive + rng.random_range(1_200_000..3_600_000) } else { arrive };
            for (from, to, afternoon) in [(arrive, lunch, false), (back, leave, true)] {
                t = t.max(from);
                while t < to {
                    let state = match rng.random_range(0..10) {
                        0..=3 => PowerState::Work,
                        4..=7 => PowerState::ShortIdle,
                        _ => PowerState::Idle,
                    };
                    let battery = if t < charging_until {
                        BatterySnapshot::charging(60.0)
                    } else if laptop && afternoon && rng.random_bool(0.15) {
                        BatterySnapshot::on_battery(70.0)
                    } else {
                        ac
                    };
                    push(&mut segments, t, state, battery, true);
                    t += rng.random_range(120_000..2_400_000);
                }
                if !afternoon {
                    let enter_s = lunch.div_euclid(1000) + 1;
                    let wake_s = back.div_euclid(1000);
                    push(&mut segments, enter_s * 1000, PowerState::Sleep, ac, false);
                    events.push(SystemEvent::new(UtcTimestamp::from_unix(enter_s), EventKind::SleepEnter));
                    events.push(SystemEvent::new(UtcTimestamp::from_unix(wake_s), EventKind::Wake));
                    t = wake_s * 1000;
                    charging_until = t;
                }
            }
            push(&mut segments, leave, PowerState::Off, ac, false);
        }
        let end_ms = (day_start.unix() + days as i64 * 86_400) * 1000;
        segments.sort_by_key(|s| s.start_ms);
        SimulatedObserver { segments, end_ms, events }
    }

    pub fn segments(&self) -> &[TraceSegment] {
        &self.segments
    }

    pub fn end_ms(&self) -> i64 {
        self.end_ms
    }

    fn segment_at(&self, ms: i64) -> Option<&TraceSegment> {
        if ms >= self.end_ms {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.start_ms <= ms);
        idx.checked_sub(1).map(|i| &self.segments[i])
    }
}

impl SystemObserver for SimulatedObserver {
    fn poll(&mut self, now: UtcTimestamp) -> Result<(PowerState, BatterySnapshot), ObserverError> {
        match self.segment_at(now.unix() * 1000) {
            Some(seg) if seg.observable => Ok((seg.state, seg.battery)),
            _ => Err(ObserverError::Unavailable(now)),
        }
    }

    fn event_log(&self, until: UtcTimestamp) -> Vec<SystemEvent> {
        self.events.iter().copied().take_while(|e| e.ts <= until).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> UtcTimestamp {
        UtcTimestamp::from_ymd_hms(2022, 3, 14, 0, 0, 0).unwrap()
    }

    #[test]
    fn parses_trace_file() {
        let text = "# header\n03-14-22-09:00:00 sidle 1 0\n03-14-22-09:00:01 idle 0 0 # on battery\n\n03-14-22-09:00:02 work 1 1\n03-14-22-09:00:03 event sleepenter\n";
        let mut obs = parse_trace(text).unwrap();
        assert_eq!(obs.len(), 3);
        let nine = UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 0, 0).unwrap();
        assert_eq!(obs.poll(nine).unwrap().0, PowerState::ShortIdle);
        assert!(!obs.poll(nine.add_secs(1)).unwrap().1.on_ac_power);
        assert!(obs.poll(nine.add_secs(2)).unwrap().1.charging);
        assert!(obs.poll(nine.add_secs(3)).is_err());
        assert_eq!(obs.event_log(nine.add_secs(3)).len(), 1);
        assert!(obs.event_log(nine.add_secs(2)).is_empty());
    }

    #[test]
    fn trace_errors_name_the_line() {
        let err = parse_trace("03-14-22-09:00:00 sidle 1 0\n03-14-22-09:00:01 turbo 1 0").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_trace("03-14-22-09:00:00 sidle 1").is_err());
        assert!(parse_trace("yesterday sidle 1 0").is_err());
    }

    #[test]
    fn office_day_is_deterministic_and_has_lunch_sleep() {
        let a = SimulatedObserver::office_days(7, t0(), 2, false);
        let b = SimulatedObserver::office_days(7, t0(), 2, false);
        assert_eq!(a.segments(), b.segments());
        let (spans, open) = super::super::sleep_spans(&a.event_log(t0().add_secs(2 * 86_400)));
        assert_eq!(spans.len(), 2);
        assert!(open.is_none());
        let mut obs = a.clone();
        assert!(obs.poll(t0().add_secs(3 * 3600)).is_err(), "off at night");
        assert!(obs.poll(t0().add_secs(10 * 3600)).is_ok(), "working mid-morning");
    }
}
