//! Injectable time sources.

use std::sync::atomic::{AtomicI64, Ordering};
use std::time::Duration;

use crate::domain::UtcTimestamp;

pub trait Clock: Send + Sync {
    fn now(&self) -> UtcTimestamp;

    /// Blocks (or advances simulated time) until `deadline`.
    fn sleep_until(&self, deadline: UtcTimestamp);
}

/// Wall-clock time.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> UtcTimestamp {
        UtcTimestamp::now()
    }

    fn sleep_until(&self, deadline: UtcTimestamp) {
        let wait = deadline.secs_since(self.now());
        if wait > 0 {
            std::thread::sleep(Duration::from_secs(wait as u64));
        }
    }
}

/// Simulated time that jumps forward instantly.
#[derive(Debug)]
pub struct SimClock {
    now: AtomicI64,
}

impl SimClock {
    pub fn new(start: UtcTimestamp) -> Self {
        SimClock { now: AtomicI64::new(start.unix()) }
    }

    pub fn set(&self, t: UtcTimestamp) {
        self.now.store(t.unix(), Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) -> UtcTimestamp {
        UtcTimestamp::from_unix(self.now.fetch_add(secs, Ordering::SeqCst) + secs)
    }
}

impl Clock for SimClock {
    fn now(&self) -> UtcTimestamp {
        UtcTimestamp::from_unix(self.now.load(Ordering::SeqCst))
    }

    fn sleep_until(&self, deadline: UtcTimestamp) {
        self.now.fetch_max(deadline.unix(), Ordering::SeqCst);
    }
}
