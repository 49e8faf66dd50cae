use chrono::NaiveDate;
use tracing::info;

use crate::clock::Clock;
use crate::domain::{TimeZoneSpec, UtcTimestamp};

use super::engine::FIFTEEN_MINUTES;
use super::Analytics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickKind {
    FifteenMinute(UtcTimestamp),
    /// Rollup of the local date that just ended.
    Midnight(NaiveDate),
}

/// Next due time of one periodic tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cadence {
    pub next: UtcTimestamp,
}

/// Decides which ticks are due. A tick that is late by one or more periods
/// fires once for the latest period; the missed ones are skipped.
#[derive(Debug, Clone)]
pub struct Scheduler {
    quarter: Cadence,
    midnight: Cadence,
    tz: TimeZoneSpec,
    pub skipped: u64,
}

fn next_quarter_after(t: UtcTimestamp) -> UtcTimestamp {
    UtcTimestamp::from_unix((t.unix().div_euclid(FIFTEEN_MINUTES) + 1) * FIFTEEN_MINUTES)
}

impl Scheduler {
    pub fn new(start: UtcTimestamp, tz: TimeZoneSpec) -> Self {
        let midnight = Self::next_midnight_after(&tz, start);
        Scheduler { quarter: Cadence { next: next_quarter_after(start) }, midnight: Cadence { next: midnight }, tz, skipped: 0 }
    }

    fn next_midnight_after(tz: &TimeZoneSpec, t: UtcTimestamp) -> UtcTimestamp {
        let mut date = tz.local_date(t);
        loop {
            date = date.succ_opt().expect("date in range");
            let m = tz.start_of_day(date);
            if m > t {
                return m;
            }
        }
    }

    pub fn next_due(&self) -> UtcTimestamp {
        self.quarter.next.min(self.midnight.next)
    }

    pub fn due(&mut self, now: UtcTimestamp) -> Vec<TickKind> {
        let mut out = Vec::new();
        if now >= self.midnight.next {
            let latest = tz_midnight_at_or_before(&self.tz, now);
            if latest > self.midnight.next {
                self.skipped += 1;
            }
            let ended = self.tz.local_date(latest).pred_opt().expect("date in range");
            out.push(TickKind::Midnight(ended));
            self.midnight.next = Self::next_midnight_after(&self.tz, now);
        }
        if now >= self.quarter.next {
            let latest = UtcTimestamp::from_unix(now.unix().div_euclid(FIFTEEN_MINUTES) * FIFTEEN_MINUTES);
            self.skipped += (latest.secs_since(self.quarter.next) / FIFTEEN_MINUTES) as u64;
            out.push(TickKind::FifteenMinute(latest));
            self.quarter.next = latest.add_secs(FIFTEEN_MINUTES);
        }
        out
    }

    /// Runs due ticks until `until` (exclusive), sleeping on the clock in between.
    pub fn run<C: Clock + ?Sized>(&mut self, analytics: &Analytics, clock: &C, until: UtcTimestamp) {
        loop {
            let next = self.next_due();
            if next >= until {
                return;
            }
            clock.sleep_until(next);
            for tick in self.due(clock.now()) {
                run_tick(analytics, tick);
            }
        }
    }
}

fn tz_midnight_at_or_before(tz: &TimeZoneSpec, t: UtcTimestamp) -> UtcTimestamp {
    let m = tz.start_of_day(tz.local_date(t));
    if m <= t {
        m
    } else {
        tz.start_of_day(tz.local_date(t).pred_opt().expect("date in range"))
    }
}

/// Executes one tick; failures are logged and the tick is dropped.
pub fn run_tick(analytics: &Analytics, tick: TickKind) {
    match tick {
        TickKind::FifteenMinute(now) => {
            match analytics.fifteen_minute_tick(now) {
                Ok(t) => info!(at = %now, indicators = t.len(), "trend tick"),
                Err(e) => analytics.log_failure("trend tick", &e),
            }
            if let Err(e) = analytics.comfort_tick(now) {
                analytics.log_failure("comfort tick", &e);
            }
        }
        TickKind::Midnight(date) => match analytics.midnight_tick(date) {
            Ok(r) => info!(%date, users = r.users.len(), "midnight rollup"),
            Err(e) => analytics.log_failure("midnight rollup", &e),
        },
    }
}
