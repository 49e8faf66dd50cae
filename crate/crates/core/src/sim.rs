//! Accelerated in-process fleet: many agents, one ingestion service, analytics ticks.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::agent::{Agent, AgentConfig, AgentStats, SenderStats, SimulatedAmbient};
use crate::analytics::{Analytics, DailyRollup, TrendIndicator, FIFTEEN_MINUTES};
use crate::clock::{Clock, SimClock};
use crate::console::{rogue_zones, RogueZoneReport, RogueZoneSettings};
use crate::domain::{UserId, UtcTimestamp};
use crate::ingest::{IngestionService, LoopbackTransport};
use crate::store::{StoreError, Stores, UserRecord};
use crate::sumve::{MachinePowerProfile, SimulatedObserver};

#[derive(Debug, Clone, PartialEq)]
pub struct FleetConfig {
    pub agents: usize,
    pub zones: usize,
    /// Index of the zone whose desks read about 30 °C.
    pub hot_zone: Option<usize>,
    /// Start of the simulated period, a UTC midnight.
    pub start: UtcTimestamp,
    pub days: u32,
    pub seed: u64,
    pub sample_interval_s: u32,
    pub report_interval_s: u32,
    pub threads: usize,
}

impl FleetConfig {
    pub fn new(agents: usize, start: UtcTimestamp) -> Self {
        FleetConfig {
            agents,
            zones: 5,
            hot_zone: Some(0),
            start,
            days: 1,
            seed: 1,
            sample_interval_s: 5,
            report_interval_s: 30,
            threads: std::thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }

    pub fn zone_name(i: usize) -> String {
        format!("zone-{i}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutcome {
    pub user_id: UserId,
    pub zone: String,
    pub stats: AgentStats,
    pub sender: SenderStats,
}

#[derive(Debug, Clone)]
pub struct FleetReport {
    pub end: UtcTimestamp,
    pub agents: Vec<AgentOutcome>,
    /// Trend indicators computed at each quarter-hour boundary.
    pub trend_ticks: BTreeMap<UtcTimestamp, Vec<TrendIndicator>>,
    pub rollups: Vec<DailyRollup>,
    pub rogue: Vec<RogueZoneReport>,
}

fn provision(stores: &Stores, cfg: &FleetConfig, i: usize) -> Result<UserRecord, StoreError> {
    let laptop = i.is_multiple_of(3);
    let profile = if laptop { MachinePowerProfile::new(0.5, 1.5, 8.0, 25.0) } else { MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0) };
    let record = UserRecord {
        user_id: UserId::new(format!("user-{i:03}")).map_err(|e| StoreError::Invalid(e.to_string()))?,
        office_location: format!("office-{i}"),
        department: ["R&D", "Ops", "Sales"][i % 3].into(),
        floor: format!("{}", 1 + i % 4),
        building: if i.is_multiple_of(2) { "North".into() } else { "South".into() },
        hvac_zone: FleetConfig::zone_name(i % cfg.zones.max(1)),
        machine_type: if laptop { "laptop".into() } else { "desktop".into() },
        monitor_type: (!laptop).then(|| "24in LCD".into()),
        power_profile: profile,
    };
    stores.upsert_user(record.clone())?;
    Ok(record)
}

type FleetAgent = Agent<SimulatedObserver, SimulatedAmbient, LoopbackTransport>;

/// Provisions `cfg.agents` users in `stores` and runs them in lockstep
/// quarter-hour chunks, ticking analytics at every boundary.
pub fn run_fleet(stores: &Stores, cfg: &FleetConfig) -> Result<FleetReport, StoreError> {
    let server_clock = Arc::new(SimClock::new(cfg.start));
    let service = IngestionService::new(stores.clone(), server_clock.clone());
    let analytics = Analytics::new(stores.clone());

    let mut agents: Vec<(FleetAgent, SimClock)> = Vec::with_capacity(cfg.agents);
    let mut zones = Vec::with_capacity(cfg.agents);
    for i in 0..cfg.agents {
        let user = provision(stores, cfg, i)?;
        zones.push(user.hvac_zone.clone());
        let seed = cfg.seed.wrapping_mul(1_000).wrapping_add(i as u64);
        let mut ambient = SimulatedAmbient::new(seed).with_temperature(23.0, 1.5);
        if cfg.hot_zone == Some(i % cfg.zones.max(1)) {
            ambient = ambient.with_temperature(30.0, 1.0);
        }
        let observer = SimulatedObserver::office_days(seed, cfg.start, cfg.days, user.machine_type == "laptop");
        let mut config = AgentConfig::new(user.user_id.clone());
        config.sample_interval_s = cfg.sample_interval_s;
        config.report_interval_s = cfg.report_interval_s;
        config.monitor_attached = user.monitor_attached();
        config.profile = Some(user.power_profile);
        let transport = LoopbackTransport { service: service.clone() };
        let agent = Agent::new(config, user.power_profile, observer, ambient, transport, cfg.start);
        agents.push((agent, SimClock::new(cfg.start)));
    }

    let end = cfg.start.add_secs(cfg.days as i64 * 86_400);
    let mut trend_ticks = BTreeMap::new();
    let mut rollups = Vec::new();
    let chunk = (agents.len().div_ceil(cfg.threads.max(1))).max(1);
    let mut boundary = cfg.start;
    while boundary < end {
        boundary = boundary.add_secs(FIFTEEN_MINUTES).min(end);
        server_clock.set(boundary);
        std::thread::scope(|s| {
            for group in agents.chunks_mut(chunk) {
                s.spawn(move || {
                    for (agent, clock) in group {
                        agent.run_until(&*clock, boundary);
                    }
                });
            }
        });
        trend_ticks.insert(boundary, analytics.fifteen_minute_tick(boundary)?);
        analytics.comfort_tick(boundary)?;
        if boundary.unix().rem_euclid(86_400) == 0 {
            let date = boundary.to_datetime().date_naive().pred_opt().expect("date in range");
            rollups.push(analytics.midnight_tick(date)?);
        }
    }
    let rogue = rogue_zones(stores, cfg.start, end, &RogueZoneSettings::default())?;
    let agents = agents
        .into_iter()
        .zip(zones)
        .map(|((agent, _), zone)| AgentOutcome {
            user_id: agent.config().user_id.clone(),
            zone,
            stats: agent.stats(),
            sender: agent.sender().stats(),
        })
        .collect();
    debug_assert_eq!(server_clock.now(), end);
    Ok(FleetReport { end, agents, trend_ticks, rollups, rogue })
}
