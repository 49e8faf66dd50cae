use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tracing::{debug, warn};

use crate::domain::Report;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("ingestion unreachable: {0}")]
    Unreachable(String),
}

/// One request/response exchange with the server.
pub trait Transport: Send {
    /// POSTs `body` to `path` and returns the HTTP status.
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError>;

    /// GETs `path` and returns status and body.
    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError> {
        (**self).post(path, body)
    }

    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError> {
        (**self).get(path)
    }
}

/// Blocking HTTP client for `<base>/sensor` and friends.
pub struct HttpTransport {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base: &str) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        Ok(HttpTransport { base: base.trim_end_matches('/').to_string(), client })
    }
}

impl Transport for HttpTransport {
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError> {
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .header("content-type", "text/plain")
            .body(body.to_string())
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        Ok(resp.status().as_u16())
    }

    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError> {
        let resp =
            self.client.get(format!("{}{path}", self.base)).send().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        Ok((status, resp.text().map_err(|e| TransportError::Unreachable(e.to_string()))?))
    }
}

/// Wraps a transport with an on/off switch, for outage drills.
pub struct Switchable<T> {
    inner: T,
    down: Arc<AtomicBool>,
}

impl<T> Switchable<T> {
    pub fn new(inner: T) -> (Self, Arc<AtomicBool>) {
        let down = Arc::new(AtomicBool::new(false));
        (Switchable { inner, down: down.clone() }, down)
    }
}

impl<T: Transport> Transport for Switchable<T> {
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError> {
        if self.down.load(Ordering::SeqCst) {
            return Err(TransportError::Unreachable("switched off".into()));
        }
        self.inner.post(path, body)
    }

    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError> {
        if self.down.load(Ordering::SeqCst) {
            return Err(TransportError::Unreachable("switched off".into()));
        }
        self.inner.get(path)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub sent: u64,
    /// Dropped because the buffer was full.
    pub dropped: u64,
    /// Refused by the server as malformed (400); retrying cannot help.
    pub rejected: u64,
}

/// FIFO of unacknowledged reports, flushed in order once per cycle.
pub struct ReportSender<T> {
    transport: T,
    path: String,
    buffer: VecDeque<Report>,
    capacity: usize,
    stats: SenderStats,
}

impl<T: Transport> ReportSender<T> {
    pub fn new(transport: T, capacity: usize) -> Self {
        ReportSender { transport, path: "/sensor".into(), buffer: VecDeque::new(), capacity: capacity.max(1), stats: SenderStats::default() }
    }

    pub fn stats(&self) -> SenderStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    /// Queues a report, evicting the oldest when full.
    pub fn enqueue(&mut self, report: Report) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
            self.stats.dropped += 1;
        }
        self.buffer.push_back(report);
    }

    /// Sends queued reports in order, stopping at the first one not acknowledged.
    /// Returns the number acknowledged.
    pub fn flush(&mut self) -> usize {
        let mut acked = 0;
        while let Some(report) = self.buffer.front() {
            match self.transport.post(&self.path, &report.to_wire()) {
                Ok(status) if (200..300).contains(&status) => {
                    self.buffer.pop_front();
                    self.stats.sent += 1;
                    acked += 1;
                }
                Ok(400) => {
                    warn!(line = %report, "server rejected report as malformed");
                    self.buffer.pop_front();
                    self.stats.rejected += 1;
                }
                Ok(status) => {
                    debug!(status, pending = self.buffer.len(), "ingestion refused, keeping buffer");
                    break;
                }
                Err(e) => {
                    debug!(%e, pending = self.buffer.len(), "ingestion unreachable, keeping buffer");
                    break;
                }
            }
        }
        acked
    }

    /// Queues then flushes.
    pub fn send(&mut self, report: Report) -> usize {
        self.enqueue(report);
        self.flush()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{Field, SensorIndicator, UserId, UtcTimestamp};

    /// Records accepted lines; answers with a scripted status.
    #[derive(Default)]
    pub(crate) struct Recorder {
        pub lines: Vec<String>,
        pub status: Option<u16>,
    }

    impl Transport for Recorder {
        fn post(&mut self, _path: &str, body: &str) -> Result<u16, TransportError> {
            match self.status {
                None => Err(TransportError::Unreachable("down".into())),
                Some(s) => {
                    if (200..300).contains(&s) {
                        self.lines.push(body.to_string());
                    }
                    Ok(s)
                }
            }
        }

        fn get(&mut self, _path: &str) -> Result<(u16, String), TransportError> {
            Ok((404, String::new()))
        }
    }

    fn report(ts: i64) -> Report {
        Report::new(UserId::new("u1").unwrap(), UtcTimestamp::from_unix(1_650_000_000 + ts), SensorIndicator::Energy)
            .unwrap()
            .with(Field::IntervalWh, 0.25)
            .unwrap()
    }

    #[test]
    fn reachable_keeps_buffer_empty() {
        let mut s = ReportSender::new(Recorder { status: Some(200), ..Default::default() }, 10);
        assert_eq!(s.send(report(0)), 1);
        assert_eq!(s.pending(), 0);
    }

    #[test]
    fn outage_then_recovery_flushes_in_order() {
        let mut s = ReportSender::new(Recorder::default(), 10);
        for i in 0..3 {
            assert_eq!(s.send(report(i * 30)), 0);
        }
        assert_eq!(s.pending(), 3);
        s.transport_mut().status = Some(503);
        assert_eq!(s.flush(), 0);
        s.transport_mut().status = Some(200);
        assert_eq!(s.send(report(90)), 4);
        let ts: Vec<UtcTimestamp> = s.transport.lines.iter().map(|l| crate::domain::parse_report(l).unwrap().tsutc()).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.stats().sent, 4);
    }

    #[test]
    fn capacity_drops_oldest() {
        let mut s = ReportSender::new(Recorder::default(), 1000);
        for i in 0..1001 {
            s.enqueue(report(i));
        }
        assert_eq!(s.pending(), 1000);
        assert_eq!(s.stats().dropped, 1);
        s.transport_mut().status = Some(200);
        s.flush();
        assert_eq!(crate::domain::parse_report(&s.transport.lines[0]).unwrap().tsutc(), report(1).tsutc());
    }

    #[test]
    fn malformed_is_not_retried() {
        let mut s = ReportSender::new(Recorder { status: Some(400), ..Default::default() }, 10);
        s.send(report(0));
        assert_eq!(s.pending(), 0);
        assert_eq!(s.stats().rejected, 1);
    }
}
