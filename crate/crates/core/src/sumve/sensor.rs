use crate::clock::Clock;
use crate::domain::UtcTimestamp;

use super::{accumulate, sleep_spans, PowerSample, PowerState, SpanKind, StateOccupancy, SystemObserver, Window};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleOutcome {
    Sample(PowerSample),
    /// No observation for this second: the observer failed or the tick was missed.
    Gap(UtcTimestamp),
}

/// Polls the observer once per clock second from the clock's current time up to `until` (exclusive).
pub fn sample_loop<'a, O, C>(observer: &'a mut O, clock: &'a C, until: UtcTimestamp) -> impl Iterator<Item = SampleOutcome> + 'a
where
    O: SystemObserver + ?Sized,
    C: Clock + ?Sized,
{
    let mut next = clock.now();
    std::iter::from_fn(move || {
        if next >= until {
            return None;
        }
        let tick = next;
        next = next.add_secs(1);
        clock.sleep_until(tick);
        if clock.now() > tick {
            return Some(SampleOutcome::Gap(tick));
        }
        Some(match observer.poll(tick) {
            Ok((state, battery)) => SampleOutcome::Sample(PowerSample { ts: tick, state, battery }),
            Err(_) => SampleOutcome::Gap(tick),
        })
    })
}

/// The per-machine sampling state: samples of the open window and the observer.
#[derive(Debug)]
pub struct EnergySensor<O> {
    observer: O,
    window_start: UtcTimestamp,
    samples: Vec<PowerSample>,
}

impl<O: SystemObserver> EnergySensor<O> {
    pub fn new(observer: O, start: UtcTimestamp) -> Self {
        EnergySensor { observer, window_start: start, samples: Vec::new() }
    }

    pub fn window_start(&self) -> UtcTimestamp {
        self.window_start
    }

    pub fn observer(&self) -> &O {
        &self.observer
    }

    /// Takes the sample for second `now`.
    pub fn sample(&mut self, now: UtcTimestamp) -> SampleOutcome {
        match self.observer.poll(now) {
            Ok((state, battery)) => {
                let sample = PowerSample { ts: now, state, battery };
                self.record(sample);
                SampleOutcome::Sample(sample)
            }
            Err(_) => SampleOutcome::Gap(now),
        }
    }

    pub fn record(&mut self, sample: PowerSample) {
        if sample.ts >= self.window_start && self.samples.last().is_none_or(|s| s.ts < sample.ts) {
            self.samples.push(sample);
        }
    }

    /// Closes `[window_start, end)` into an occupancy record.
    ///
    /// Seconds without a sample are attributed from the event log: inside a
    /// sleep/wake span they count as sleep, inside a sleep/boot span as off,
    /// and with no evidence at all as off. Returns `None` (window stays open)
    /// while the host is still inside an unmatched sleep at `end`.
    pub fn close_window(&mut self, end: UtcTimestamp) -> Option<(Window, StateOccupancy)> {
        if end <= self.window_start {
            return None;
        }
        let window = Window::new(self.window_start, end);
        let split = self.samples.partition_point(|s| s.ts < end);
        let last_second_missing = self.samples[..split].last().is_none_or(|s| s.ts < end.add_secs(-1));

        let (spans, open) = sleep_spans(&self.observer.event_log(end));
        if last_second_missing && open.is_some_and(|since| since < end) {
            return None;
        }

        let mut occ = accumulate(&self.samples[..split], window);
        let mut sampled = self.samples[..split].iter().map(|s| s.ts).peekable();
        let mut t = window.start;
        while t < end {
            if sampled.peek() == Some(&t) {
                sampled.next();
            } else {
                let state = spans
                    .iter()
                    .find(|sp| sp.start <= t && t < sp.end)
                    .map(|sp| match sp.kind {
                        SpanKind::Sleep => PowerState::Sleep,
                        SpanKind::Off => PowerState::Off,
                    })
                    .unwrap_or(PowerState::Off);
                occ.add(state, 1);
            }
            t = t.add_secs(1);
        }

        self.samples.drain(..split);
        self.window_start = end;
        Some((window, occ))
    }
}
