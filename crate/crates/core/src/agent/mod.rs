//! The desk agent: ambient and energy sampling, report assembly and push.

mod ambient;
mod config;
mod sender;

use std::sync::atomic::{AtomicBool, Ordering};

use serde::Deserialize;
use thiserror::Error;
use tracing::{info, warn};

use crate::clock::Clock;
use crate::domain::{AmbientReading, UtcTimestamp};
use crate::sumve::{make_energy_report, EnergySensor, MachinePowerProfile, SystemObserver};

pub use ambient::{AmbientBackend, BackendError, FixedAmbient, SimulatedAmbient, UnpluggedAmbient};
pub use config::{AgentConfig, AgentSettings, ConfigError};
pub use sender::{HttpTransport, ReportSender, SenderStats, Switchable, Transport, TransportError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("profile lookup for {user} failed with status {status}")]
    ProfileLookup { user: String, status: u16 },
    #[error("bad profile response: {0}")]
    ProfileBody(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentStats {
    pub ambient_emitted: u64,
    pub energy_emitted: u64,
    /// Cycles without a successful ambient sample.
    pub ambient_skipped: u64,
    /// Report boundaries where the energy window stayed open.
    pub energy_deferred: u64,
    /// Windows spent entirely on battery.
    pub energy_suppressed: u64,
}

/// Per-user SUM vE settings as served by `GET /config/{userId}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SumveConfig {
    pub power_profile: MachinePowerProfile,
    pub monitor_attached: bool,
}

/// Asks the server for the user's provisioned power profile.
pub fn fetch_sumve_config<T: Transport>(transport: &mut T, config: &AgentConfig) -> Result<SumveConfig, AgentError> {
    let (status, body) = transport.get(&format!("/config/{}", config.user_id))?;
    if status != 200 {
        return Err(AgentError::ProfileLookup { user: config.user_id.to_string(), status });
    }
    serde_json::from_str(&body).map_err(|e| AgentError::ProfileBody(e.to_string()))
}

pub struct Agent<O, A, T> {
    config: AgentConfig,
    profile: MachinePowerProfile,
    sensor: EnergySensor<O>,
    ambient: A,
    sender: ReportSender<T>,
    latest_ambient: Option<(UtcTimestamp, AmbientReading)>,
    start: UtcTimestamp,
    cursor: UtcTimestamp,
    moved: bool,
    stats: AgentStats,
}

impl<O: SystemObserver, A: AmbientBackend, T: Transport> Agent<O, A, T> {
    pub fn new(
        config: AgentConfig,
        profile: MachinePowerProfile,
        observer: O,
        ambient: A,
        transport: T,
        start: UtcTimestamp,
    ) -> Self {
        let capacity = config.buffer_capacity;
        Agent {
            config,
            profile,
            sensor: EnergySensor::new(observer, start),
            ambient,
            sender: ReportSender::new(transport, capacity),
            latest_ambient: None,
            start,
            cursor: start,
            moved: false,
            stats: AgentStats::default(),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn stats(&self) -> AgentStats {
        self.stats
    }

    pub fn sender(&self) -> &ReportSender<T> {
        &self.sender
    }

    pub fn sender_mut(&mut self) -> &mut ReportSender<T> {
        &mut self.sender
    }

    /// The next second the agent will process.
    pub fn cursor(&self) -> UtcTimestamp {
        self.cursor
    }

    /// While moved, the host is away from its desk and ambient reports stop.
    pub fn set_moved(&mut self, moved: bool) {
        self.moved = moved;
    }

    /// Processes one second: samples, and at the end of each reporting
    /// interval emits the ambient and energy reports and flushes the buffer.
    pub fn step<C: Clock + ?Sized>(&mut self, clock: &C) {
        let t = self.cursor;
        clock.sleep_until(t);
        self.sensor.sample(t);
        let elapsed = t.secs_since(self.start);
        if elapsed % self.config.sample_interval_s as i64 == 0 {
            match self.ambient.read(t) {
                Ok(r) => self.latest_ambient = Some((t, r)),
                Err(e) => warn!(%e, user = %self.config.user_id, "ambient read failed"),
            }
        }
        let end = t.add_secs(1);
        if (elapsed + 1) % self.config.report_interval_s as i64 == 0 {
            clock.sleep_until(end);
            self.emit(end);
        }
        self.cursor = end;
    }

    /// Steps through every second before `until`.
    pub fn run_until<C: Clock + ?Sized>(&mut self, clock: &C, until: UtcTimestamp) {
        while self.cursor < until {
            self.step(clock);
        }
    }

    /// Emits the open, partial reporting window up to the cursor and flushes.
    pub fn finish(&mut self) {
        if self.cursor > self.sensor.window_start() {
            self.emit(self.cursor);
        } else {
            self.sender.flush();
        }
    }

    fn emit(&mut self, end: UtcTimestamp) {
        let user = self.config.user_id.clone();
        match self.latest_ambient.take() {
            Some((ts, reading)) if !self.moved => match reading.to_report(user.clone(), ts) {
                Ok(report) => {
                    self.sender.enqueue(report);
                    self.stats.ambient_emitted += 1;
                }
                Err(e) => warn!(%e, "ambient report not representable"),
            },
            Some(_) => {}
            None => self.stats.ambient_skipped += 1,
        }
        match self.sensor.close_window(end) {
            Some((_, occ)) => match make_energy_report(&user, end, &occ, &self.profile, self.config.monitor_attached) {
                Ok(Some(report)) => {
                    self.sender.enqueue(report);
                    self.stats.energy_emitted += 1;
                }
                Ok(None) => self.stats.energy_suppressed += 1,
                Err(e) => warn!(%e, "energy report not representable"),
            },
            None => self.stats.energy_deferred += 1,
        }
        self.sender.flush();
    }
}

/// Runs an agent against the configured ingestion URL until `stop` is set.
pub fn run_agent<O, A, C>(config: AgentConfig, ambient: A, observer: O, clock: &C, stop: &AtomicBool) -> Result<AgentStats, AgentError>
where
    O: SystemObserver,
    A: AmbientBackend,
    C: Clock + ?Sized,
{
    config.validate()?;
    let mut transport = HttpTransport::new(&config.ingestion_url)?;
    let (profile, monitor) = match config.profile {
        Some(p) => (p, config.monitor_attached),
        None => {
            let c = fetch_sumve_config(&mut transport, &config)?;
            (c.power_profile, c.monitor_attached)
        }
    };
    let config = AgentConfig { monitor_attached: monitor, ..config };
    info!(user = %config.user_id, url = %config.ingestion_url, "agent started");
    let mut agent = Agent::new(config, profile, observer, ambient, transport, clock.now());
    while !stop.load(Ordering::SeqCst) {
        agent.step(clock);
    }
    agent.finish();
    Ok(agent.stats())
}

#[cfg(test)]
mod tests {
    use super::sender::tests::Recorder;
    use super::*;
    use crate::clock::SimClock;
    use crate::domain::{parse_report, SensorIndicator, UserId};
    use crate::sumve::{PowerState, SimulatedObserver};

    fn t0() -> UtcTimestamp {
        UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 0).unwrap()
    }

    fn agent<A: AmbientBackend>(ambient: A, status: Option<u16>) -> Agent<SimulatedObserver, A, Recorder> {
        Agent::new(
            AgentConfig::new(UserId::new("u1").unwrap()),
            MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0),
            SimulatedObserver::constant(PowerState::ShortIdle, t0(), 3600),
            ambient,
            Recorder { status, ..Default::default() },
            t0(),
        )
    }

    fn count(lines: &[String], indicator: SensorIndicator) -> usize {
        lines.iter().filter(|l| parse_report(l).unwrap().indicator() == indicator).count()
    }

    #[test]
    fn ninety_seconds_at_defaults() {
        let clock = SimClock::new(t0());
        let mut a = agent(SimulatedAmbient::new(1), Some(200));
        a.run_until(&clock, t0().add_secs(90));
        let lines = &a.sender.transport_mut().lines;
        assert_eq!(count(lines, SensorIndicator::Ambient), 3);
        assert_eq!(count(lines, SensorIndicator::Energy), 3);
        let energy = parse_report(&lines[1]).unwrap();
        assert_eq!(energy.number(crate::domain::Field::IntervalWh), Some(0.25));
    }

    #[test]
    fn stopping_mid_window_reports_only_observed_seconds() {
        let clock = SimClock::new(t0());
        let mut a = agent(FixedAmbient(AmbientReading::new(50.0, 25.0, 60.0).unwrap()), Some(200));
        a.run_until(&clock, t0().add_secs(42));
        a.finish();
        let lines = a.sender.transport_mut().lines.clone();
        assert_eq!(count(&lines, SensorIndicator::Energy), 2);
        let last = parse_report(lines.last().unwrap()).unwrap();
        assert_eq!(last.tsutc(), t0().add_secs(42));
        assert_eq!(last.number(crate::domain::Field::ShortIdleSeconds), Some(12.0));
        a.finish();
        assert_eq!(a.sender.transport_mut().lines.len(), lines.len());
    }

    #[test]
    fn failing_backend_still_reports_energy() {
        let clock = SimClock::new(t0());
        let mut a = agent(UnpluggedAmbient, Some(200));
        a.run_until(&clock, t0().add_secs(90));
        let lines = a.sender.transport_mut().lines.clone();
        assert_eq!(count(&lines, SensorIndicator::Ambient), 0);
        assert_eq!(count(&lines, SensorIndicator::Energy), 3);
        assert_eq!(a.stats().ambient_skipped, 3);
    }

    #[test]
    fn sample_values_on_the_wire() {
        let clock = SimClock::new(t0());
        let mut a = agent(FixedAmbient(AmbientReading::new(50.0, 25.0, 60.0).unwrap()), Some(200));
        a.run_until(&clock, t0().add_secs(30));
        let line = a.sender.transport_mut().lines[0].clone();
        assert_eq!(line, r#"{"id": "u1", "tsutc": "03-14-22-09:30:25", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor"}"#);
    }

    #[test]
    fn emission_is_monotone() {
        let clock = SimClock::new(t0());
        let mut a = agent(SimulatedAmbient::new(3), Some(200));
        a.run_until(&clock, t0().add_secs(600));
        let ts: Vec<UtcTimestamp> = a.sender.transport_mut().lines.iter().map(|l| parse_report(l).unwrap().tsutc()).collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn moved_host_stops_ambient() {
        let clock = SimClock::new(t0());
        let mut a = agent(SimulatedAmbient::new(3), Some(200));
        a.set_moved(true);
        a.run_until(&clock, t0().add_secs(60));
        assert_eq!(count(&a.sender.transport_mut().lines, SensorIndicator::Ambient), 0);
    }
}
