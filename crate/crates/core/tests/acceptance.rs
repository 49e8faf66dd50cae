//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! PASS or FAIL line per criterion and exits non-zero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{NaiveDate, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poem_core::agent::{Agent, AgentConfig, FixedAmbient, Switchable, Transport, TransportError};
use poem_core::analytics::{Analytics, DailyAverage, FIFTEEN_MINUTES};
use poem_core::clock::SimClock;
use poem_core::console::{ConsoleApi, ConsoleError};
use poem_core::domain::{
    parse_report, serialize_report, AmbientReading, Field, Report, SensorIndicator, TimeZoneSpec, UserId, UtcTimestamp,
};
use poem_core::http::{spawn_server, AppState};
use poem_core::ingest::{IngestionService, LoopbackTransport};
use poem_core::sim::{run_fleet, FleetConfig};
use poem_core::store::{
    Audience, GroupKey, GroupKind, NotificationSource, SensorDocument, SiteRecord, Stores, StreamId, UserRecord,
};
use poem_core::sumve::{
    tec_annual, BatterySnapshot, MachinePowerProfile, PowerState, SimulatedObserver, SumveError, TimeFractions, TraceSegment,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("energy sensor matches the continuous integral", sumve_oracle),
        ("annual consumption spot checks", tec_spot_checks),
        ("wire fidelity and end-to-end intake", wire_fidelity),
        ("daily rollups match a linear scan", analytics_brute_force),
        ("fleet day without loss", fleet_run),
        ("outage recovery", outage_recovery),
        ("views never expose another user's data", anonymity),
        ("comfort votes reach managers", comfort_pipeline),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, criterion) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{elapsed:.2}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ts(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> UtcTimestamp {
    UtcTimestamp::from_ymd_hms(y, mo, d, h, mi, s).unwrap()
}

fn uid(s: &str) -> UserId {
    UserId::new(s).unwrap()
}

fn user(id: &str, dept: &str, floor: &str, building: &str, zone: &str) -> UserRecord {
    UserRecord {
        user_id: uid(id),
        office_location: format!("office-{id}"),
        department: dept.into(),
        floor: floor.into(),
        building: building.into(),
        hvac_zone: zone.into(),
        machine_type: "desktop".into(),
        monitor_type: None,
        power_profile: MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0),
    }
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let spent = started.elapsed();
    if spent > limit {
        return Err(format!("{what} took {spent:.2?}, limit {limit:?}"));
    }
    Ok(())
}

fn sumve_oracle() -> Outcome {
    let started = Instant::now();
    let profile = MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0);
    let start = ts(2022, 3, 14, 9, 0, 0);
    let end = start.add_secs(8 * 3600);
    let (start_ms, end_ms) = (start.unix() * 1000, end.unix() * 1000);

    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let mut segments = Vec::new();
    let mut t = start_ms;
    let mut previous = None;
    while t < end_ms {
        let state = loop {
            let s = PowerState::ALL[rng.random_range(0..PowerState::ALL.len())];
            if Some(s) != previous {
                break s;
            }
        };
        segments.push(TraceSegment { start_ms: t, state, battery: BatterySnapshot::AC_FULL, observable: true });
        previous = Some(state);
        t += rng.random_range(60_000..1_500_000);
    }
    let transitions = segments.len() - 1;
    ensure!(transitions >= 20, "only {transitions} transitions");

    let mut exact_wh = 0.0;
    for (i, seg) in segments.iter().enumerate() {
        let until = segments.get(i + 1).map_or(end_ms, |n| n.start_ms);
        let watts = match seg.state {
            PowerState::Off => 1.0,
            PowerState::Sleep => 2.0,
            PowerState::Idle => 10.0,
            PowerState::ShortIdle | PowerState::Work => 30.0,
        };
        exact_wh += watts * (until - seg.start_ms) as f64 / 3_600_000.0;
    }

    let stores = Stores::in_memory();
    stores.upsert_user(user("u1", "R&D", "1", "B1", "z1")).map_err(|e| e.to_string())?;
    let service = IngestionService::new(stores.clone(), Arc::new(SimClock::new(end)));
    let observer = SimulatedObserver::from_segments(segments, end_ms, Vec::new());
    let ambient = FixedAmbient(AmbientReading::new(50.0, 22.0, 45.0).unwrap());
    let mut agent =
        Agent::new(AgentConfig::new(uid("u1")), profile, observer, ambient, LoopbackTransport { service }, start);
    agent.run_until(&SimClock::new(start), end);

    let measured_wh = Analytics::new(stores).energy_in(&uid("u1"), start, end.add_secs(1)).map_err(|e| e.to_string())?.unwrap_or(0.0);
    let bound = transitions as f64 * 30.0 / 3600.0;
    let error = (measured_wh - exact_wh).abs();
    ensure!(error <= bound, "error {error:.4} Wh exceeds bound {bound:.4} Wh (measured {measured_wh:.4}, exact {exact_wh:.4})");
    let relative = error / exact_wh;
    ensure!(relative < 0.005, "relative error {:.3}%", relative * 100.0);
    within(started, Duration::from_secs(5), "8 h trace")?;
    Ok(format!(
        "{transitions} transitions, measured {measured_wh:.3} Wh vs exact {exact_wh:.3} Wh, error {error:.4} Wh within {bound:.4} Wh ({:.4}%)",
        relative * 100.0
    ))
}

fn tec_spot_checks() -> Outcome {
    let profile = MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0);
    let fractions = TimeFractions::new(0.5, 0.2, 0.2, 0.05, 0.05).map_err(|e| e.to_string())?;
    let kwh = tec_annual(&profile, &fractions).map_err(|e| e.to_string())?;
    // 8.76 * (0.5 + 0.4 + 2 + 1.5 + 1.5)
    let hand = 51.684;
    ensure!((kwh - hand).abs() <= 1e-9, "got {kwh}, expected {hand}");

    let singles = [
        ([1.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        ([0.0, 1.0, 0.0, 0.0, 0.0], 2.0),
        ([0.0, 0.0, 1.0, 0.0, 0.0], 10.0),
        ([0.0, 0.0, 0.0, 1.0, 0.0], 30.0),
        ([0.0, 0.0, 0.0, 0.0, 1.0], 30.0),
    ];
    for (f, watts) in singles {
        let fr = TimeFractions::new(f[0], f[1], f[2], f[3], f[4]).map_err(|e| e.to_string())?;
        let got = tec_annual(&profile, &fr).map_err(|e| e.to_string())?;
        ensure!((got - 8.76 * watts).abs() <= 1e-12, "single state {f:?}: {got} != {}", 8.76 * watts);
    }

    let over = TimeFractions { t_off: 0.5, t_sleep: 0.2, t_idle: 0.2, t_sidle: 0.05, t_work: 0.05 + 2e-9 };
    ensure!(matches!(tec_annual(&profile, &over), Err(SumveError::FractionsDoNotSum(_))), "sum 1 + 2e-9 accepted");
    let under = TimeFractions { t_off: 0.5 - 2e-9, ..fractions };
    ensure!(matches!(tec_annual(&profile, &under), Err(SumveError::FractionsDoNotSum(_))), "sum 1 - 2e-9 accepted");
    let close = TimeFractions { t_work: 0.05 + 5e-10, ..fractions };
    ensure!(tec_annual(&profile, &close).is_ok(), "sum 1 + 5e-10 rejected");
    Ok(format!("tec = {kwh} kWh; 5 single-state cases; guard at 1e-9"))
}

fn wire_fidelity() -> Outcome {
    let line = r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor"}"#;
    let spaced = r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor" }"#;
    let report = parse_report(line).map_err(|e| e.to_string())?;
    ensure!(serialize_report(&report) == line, "round trip differs: {}", serialize_report(&report));
    let from_spaced = parse_report(spaced).map_err(|e| e.to_string())?;
    ensure!(from_spaced == report, "spaced variant parses differently");

    let stores = Stores::in_memory();
    stores.upsert_user(user("u1", "R&D", "1", "B1", "z1")).map_err(|e| e.to_string())?;
    let clock = Arc::new(SimClock::new(ts(2022, 3, 14, 9, 30, 1)));
    let state = AppState {
        ingest: IngestionService::new(stores.clone(), clock.clone()),
        console: ConsoleApi::new(stores.clone(), clock),
    };
    let server = spawn_server(state, "127.0.0.1:0".parse().unwrap()).map_err(|e| e.to_string())?;
    let client = reqwest::blocking::Client::new();
    let post = |body: &str| -> Result<u16, String> {
        client.post(format!("{}/sensor", server.base_url())).body(body.to_string()).send().map(|r| r.status().as_u16()).map_err(|e| e.to_string())
    };
    ensure!(post(line)? == 200, "provisioned user's line refused");
    ensure!(post(spaced)? == 200, "spaced line refused");
    let tempf = line.replace("\"tempC\"", "\"tempF\"");
    let status = post(&tempf)?;
    ensure!(status == 400, "tempF answered {status}");

    let stream = StreamId::new(uid("u1"), SensorIndicator::Ambient);
    let docs = stores.sensors.query_range(&stream, ts(2022, 3, 14, 0, 0, 0), ts(2022, 3, 15, 0, 0, 0)).map_err(|e| e.to_string())?;
    ensure!(docs.len() == 2, "{} documents stored", docs.len());
    let stored = docs[0].to_report().map_err(|e| e.to_string())?;
    ensure!(serialize_report(&stored) == line, "stored document serializes as {}", serialize_report(&stored));
    server.stop();
    Ok("parse, byte-identical round trip, HTTP 200 for a provisioned user, 400 for tempF".into())
}

fn analytics_brute_force() -> Outcome {
    let started = Instant::now();
    let stores = Stores::in_memory();
    let users = [
        user("a", "R&D", "1", "North", "z1"),
        user("b", "R&D", "2", "North", "z1"),
        user("c", "Ops", "1", "South", "z2"),
        user("d", "Ops", "2", "South", "z2"),
        user("e", "Ops", "2", "North", "z3"),
    ];
    for u in &users {
        stores.upsert_user(u.clone()).map_err(|e| e.to_string())?;
    }
    let north: TimeZoneSpec = "+02:00".parse().map_err(|e| format!("{e}"))?;
    let south: TimeZoneSpec = "America/New_York".parse().map_err(|e| format!("{e}"))?;
    for (id, building, tz) in [("site-n", "North", north), ("site-s", "South", south)] {
        let site = SiteRecord { site_id: uid(id), building: building.into(), timezone: tz, location: building.into() };
        stores.register_site(site).map_err(|e| e.to_string())?;
    }

    // Seven local days spanning the March 2022 US daylight-saving change.
    let first = NaiveDate::from_ymd_opt(2022, 3, 10).unwrap();
    let dates: Vec<NaiveDate> = (0..7).map(|i| first + chrono::Days::new(i)).collect();
    let span_start = ts(2022, 3, 9, 0, 0, 0);
    let span_secs = 10 * 86_400;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut generated: Vec<(UserId, UtcTimestamp, f64)> = Vec::new();
    for u in &users {
        for _ in 0..1_500 {
            let at = span_start.add_secs(rng.random_range(0..span_secs));
            let wh = rng.random_range(0.0..25.0);
            let report = Report::new(u.user_id.clone(), at, SensorIndicator::Energy)
                .and_then(|r| r.with(Field::IntervalWh, wh))
                .map_err(|e| e.to_string())?;
            stores.sensors.append(SensorDocument::from_report(&report, at)).map_err(|e| e.to_string())?;
            generated.push((u.user_id.clone(), at, wh));
        }
    }

    let analytics = Analytics::new(stores.clone());
    let mut rollups = BTreeMap::new();
    for date in &dates {
        rollups.insert(*date, analytics.midnight_tick(*date).map_err(|e| e.to_string())?);
    }

    let local_date = |u: &UserRecord, at: UtcTimestamp| -> NaiveDate {
        let utc = chrono::Utc.timestamp_opt(at.unix(), 0).unwrap();
        if u.building == "North" {
            utc.with_timezone(&chrono::FixedOffset::east_opt(7200).unwrap()).date_naive()
        } else {
            utc.with_timezone(&chrono_tz::America::New_York).date_naive()
        }
    };
    let mut oracle_user: BTreeMap<(UserId, NaiveDate), f64> = BTreeMap::new();
    for (id, at, wh) in &generated {
        let u = users.iter().find(|u| &u.user_id == id).unwrap();
        let d = local_date(u, *at);
        if dates.contains(&d) {
            *oracle_user.entry((id.clone(), d)).or_default() += wh;
        }
    }

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    let mut checked = 0;
    for date in &dates {
        let rollup = &rollups[date];
        let expected: Vec<_> = oracle_user.iter().filter(|((_, d), _)| d == date).collect();
        ensure!(rollup.users.len() == expected.len(), "{date}: {} user dailies, oracle has {}", rollup.users.len(), expected.len());
        for ((id, _), total) in expected {
            let got = rollup.users.iter().find(|(u, _)| u == id).map(|(_, d)| d.total_wh);
            ensure!(got.is_some_and(|g| close(g, *total)), "{date} {id}: got {got:?}, oracle {total}");
            checked += 1;
        }
        for kind in GroupKind::ALL {
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for u in &users {
                if let Some(total) = oracle_user.get(&(u.user_id.clone(), *date)) {
                    groups.entry(u.group(kind).to_string()).or_default().push(*total);
                }
            }
            for (name, values) in groups {
                let key = GroupKey::new(kind, name.clone());
                let total: f64 = values.iter().sum();
                let mean = total / values.len() as f64;
                let got = rollup.groups.iter().find(|(k, _)| *k == key).map(|(_, d)| d.clone());
                let ok = got.as_ref().is_some_and(|g: &DailyAverage| {
                    close(g.total_wh, total) && close(g.mean_wh, mean) && g.members == values.len()
                });
                ensure!(ok, "{date} {key}: got {got:?}, oracle total {total} mean {mean} n {}", values.len());
                checked += 1;
            }
        }
    }
    for u in &users {
        let stored = stores.meta.user_dailies(&u.user_id);
        let oracle: Vec<f64> = dates.iter().filter_map(|d| oracle_user.get(&(u.user_id.clone(), *d)).copied()).collect();
        ensure!(stored.len() == oracle.len(), "{}: {} dailies stored", u.user_id, stored.len());
        let mean_stored = stored.iter().map(|d| d.total_wh).sum::<f64>() / stored.len() as f64;
        let mean_oracle = oracle.iter().sum::<f64>() / oracle.len() as f64;
        ensure!(close(mean_stored, mean_oracle), "{} weekly mean {mean_stored} vs {mean_oracle}", u.user_id);
        checked += 1;
    }
    within(started, Duration::from_secs(10), "rollup comparison")?;
    Ok(format!("{} reports, {checked} values equal within 1e-9 relative", generated.len()))
}

fn fleet_run() -> Outcome {
    let started = Instant::now();
    let stores = Stores::in_memory();
    let cfg = FleetConfig::new(30, ts(2022, 3, 14, 0, 0, 0));
    let report = run_fleet(&stores, &cfg).map_err(|e| e.to_string())?;

    let day_secs = 86_400 / i64::from(cfg.report_interval_s);
    for a in &report.agents {
        ensure!(a.sender.dropped == 0 && a.sender.rejected == 0, "{}: sender stats {:?}", a.user_id, a.sender);
        let ambient = stores.sensors.count(&StreamId::new(a.user_id.clone(), SensorIndicator::Ambient)).map_err(|e| e.to_string())?;
        let energy = stores.sensors.count(&StreamId::new(a.user_id.clone(), SensorIndicator::Energy)).map_err(|e| e.to_string())?;
        ensure!((ambient as i64 - a.stats.ambient_emitted as i64).abs() <= 1, "{}: {ambient} ambient stored, {} emitted", a.user_id, a.stats.ambient_emitted);
        ensure!((energy as i64 - a.stats.energy_emitted as i64).abs() <= 1, "{}: {energy} energy stored, {} emitted", a.user_id, a.stats.energy_emitted);
        ensure!((ambient as i64 - day_secs).abs() <= 1, "{}: {ambient} ambient reports, expected {day_secs}", a.user_id);
        ensure!(energy > 0, "{}: no energy reports", a.user_id);
    }

    ensure!(report.trend_ticks.len() == 96, "{} quarter-hour ticks", report.trend_ticks.len());
    let mut indicator_count = 0;
    for (tick, trends) in &report.trend_ticks {
        let mut active = BTreeSet::new();
        for a in &report.agents {
            let stream = StreamId::new(a.user_id.clone(), SensorIndicator::Energy);
            if !stores.sensors.query_range(&stream, tick.add_secs(-FIFTEEN_MINUTES), *tick).map_err(|e| e.to_string())?.is_empty() {
                active.insert(a.user_id.clone());
            }
        }
        let with_trend: BTreeSet<_> = trends.iter().map(|t| t.user_id.clone()).collect();
        ensure!(with_trend == active, "tick {tick}: {} active users, {} indicators", active.len(), with_trend.len());
        indicator_count += trends.len();
    }
    ensure!(indicator_count > 0, "no trend indicators at all");

    let hot = FleetConfig::zone_name(cfg.hot_zone.unwrap());
    let flagged: Vec<_> = report.rogue.iter().map(|r| r.zone.clone()).collect();
    ensure!(flagged == vec![hot.clone()], "flagged zones {flagged:?}, seeded {hot}");
    within(started, Duration::from_secs(60), "fleet day")?;
    let emitted: u64 = report.agents.iter().map(|a| a.stats.ambient_emitted + a.stats.energy_emitted).sum();
    Ok(format!("30 agents, {emitted} reports stored, {indicator_count} trend indicators over 96 ticks, rogue zone {hot}"))
}

/// Forwards to the service and records every acknowledged body.
struct Tap {
    inner: LoopbackTransport,
    delivered: Arc<Mutex<Vec<String>>>,
}

impl Transport for Tap {
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError> {
        let status = self.inner.post(path, body)?;
        if (200..300).contains(&status) {
            self.delivered.lock().unwrap().push(body.to_string());
        }
        Ok(status)
    }

    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError> {
        self.inner.get(path)
    }
}

fn outage_recovery() -> Outcome {
    let start = ts(2022, 3, 14, 10, 0, 0);
    let end = start.add_secs(300);
    let run = |outage: bool| -> Result<(Stores, Vec<String>, usize), String> {
        let stores = Stores::in_memory();
        stores.upsert_user(user("u1", "R&D", "1", "B1", "z1")).map_err(|e| e.to_string())?;
        let service = IngestionService::new(stores.clone(), Arc::new(SimClock::new(end)));
        let delivered = Arc::new(Mutex::new(Vec::new()));
        let (transport, down) = Switchable::new(Tap { inner: LoopbackTransport { service }, delivered: delivered.clone() });
        let observer = SimulatedObserver::constant(PowerState::Work, start, 600);
        let ambient = FixedAmbient(AmbientReading::new(50.0, 22.0, 45.0).unwrap());
        let profile = MachinePowerProfile::new(1.0, 2.0, 10.0, 30.0);
        let mut agent = Agent::new(AgentConfig::new(uid("u1")), profile, observer, ambient, transport, start);
        let clock = SimClock::new(start);
        agent.run_until(&clock, start.add_secs(30));
        let mut peak = 0;
        if outage {
            down.store(true, Ordering::SeqCst);
            agent.run_until(&clock, start.add_secs(120));
            peak = agent.sender().pending();
            down.store(false, Ordering::SeqCst);
        }
        agent.run_until(&clock, end);
        ensure!(agent.sender().pending() == 0, "{} reports still buffered", agent.sender().pending());
        let lines = delivered.lock().unwrap().clone();
        Ok((stores, lines, peak))
    };
    let (with_outage, lines, peak) = run(true)?;
    let (baseline, baseline_lines, _) = run(false)?;
    ensure!(peak == 6, "{peak} reports buffered across three down cycles, expected 6");
    let stamps: Vec<UtcTimestamp> =
        lines.iter().map(|l| parse_report(l).map(|r| r.tsutc())).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure!(stamps.windows(2).all(|w| w[0] <= w[1]), "delivery out of order");
    ensure!(lines == baseline_lines, "delivered lines differ from the no-outage run");
    let count = |s: &Stores| -> Result<usize, String> {
        let mut n = 0;
        for ind in [SensorIndicator::Ambient, SensorIndicator::Energy] {
            n += s.sensors.count(&StreamId::new(uid("u1"), ind)).map_err(|e| e.to_string())?;
        }
        Ok(n)
    };
    let (a, b) = (count(&with_outage)?, count(&baseline)?);
    ensure!(a == b, "{a} documents after the outage, {b} without");
    Ok(format!("6 reports held over 3 cycles, flushed in order; {a} documents in both runs"))
}

const SENTINEL_WH: [f64; 6] = [4711.0913, 5823.4471, 6931.2287, 8042.9953, 9157.6619, 3264.3307];
const SENTINEL_TEMP: [f64; 6] = [21.0137, 22.0241, 23.0353, 24.0467, 25.0571, 19.0683];
const SENTINEL_TARGET: [f64; 6] = [1111.1357, 2222.2468, 3333.3579, 4444.468, 5555.5791, 6666.6802];

struct Anon {
    api: ConsoleApi,
    ids: Vec<UserId>,
    sentinels: Vec<Vec<String>>,
}

fn anonymity_fixture(with_energy: &[bool]) -> Result<Anon, String> {
    let stores = Stores::in_memory();
    let now = ts(2022, 3, 21, 12, 0, 0);
    let layout = [
        ("sentinel-user-a", "Pair", "1", "B1"),
        ("sentinel-user-b", "Pair", "1", "B1"),
        ("sentinel-user-c", "Trio", "2", "B1"),
        ("sentinel-user-d", "Trio", "2", "B2"),
        ("sentinel-user-e", "Trio", "3", "B2"),
        ("sentinel-user-f", "Solo", "3", "B2"),
    ];
    let mut ids = Vec::new();
    let mut sentinels = Vec::new();
    for (i, (id, dept, floor, building)) in layout.iter().enumerate() {
        stores.upsert_user(user(id, dept, floor, building, &format!("zone-{floor}"))).map_err(|e| e.to_string())?;
        let uid = uid(id);
        let mut own = vec![id.to_string()];
        let temp = SENTINEL_TEMP[i];
        let ambient = AmbientReading::new(50.0, temp, 41.0).unwrap().to_report(uid.clone(), now.add_secs(-60)).unwrap();
        stores.sensors.append(SensorDocument::from_report(&ambient, now)).map_err(|e| e.to_string())?;
        own.push(serde_json::to_string(&temp).unwrap());
        if with_energy[i] {
            for day in 0..8i64 {
                let wh = SENTINEL_WH[i] + day as f64 * 0.25;
                let at = ts(2022, 3, 12, 12, 0, 0).add_secs(day * 86_400);
                let r = Report::new(uid.clone(), at, SensorIndicator::Energy).unwrap().with(Field::IntervalWh, wh).unwrap();
                stores.sensors.append(SensorDocument::from_report(&r, at)).map_err(|e| e.to_string())?;
                own.push(serde_json::to_string(&wh).unwrap());
            }
            stores.meta.set_target(&uid, SENTINEL_TARGET[i]).map_err(|e| e.to_string())?;
            own.push(serde_json::to_string(&SENTINEL_TARGET[i]).unwrap());
        }
        let note = format!("private note for {id}");
        stores.meta.post_notification(Audience::User { user_id: uid.clone() }, &note, NotificationSource::Manager, now).map_err(|e| e.to_string())?;
        own.push(note);
        ids.push(uid);
        sentinels.push(own);
    }
    let analytics = Analytics::new(stores.clone());
    for day in 0..8u64 {
        analytics.midnight_tick(NaiveDate::from_ymd_opt(2022, 3, 12).unwrap() + chrono::Days::new(day)).map_err(|e| e.to_string())?;
    }
    analytics.fifteen_minute_tick(ts(2022, 3, 19, 12, 15, 0)).map_err(|e| e.to_string())?;
    let api = ConsoleApi::new(stores, Arc::new(SimClock::new(now)));
    Ok(Anon { api, ids, sentinels })
}

fn anonymity() -> Outcome {
    let fixtures: [(&str, [bool; 6]); 3] = [
        ("everyone reporting", [true; 6]),
        ("one pair member silent", [false, true, true, true, true, true]),
        ("cold start", [false; 6]),
    ];
    let mut responses = 0;
    for (label, energy) in fixtures {
        let f = anonymity_fixture(&energy)?;
        for (i, id) in f.ids.iter().enumerate() {
            let home = serde_json::to_string(&f.api.get_home_view(id).map_err(|e| e.to_string())?).unwrap();
            let energy_view = serde_json::to_string(&f.api.get_energy_comparison(id).map_err(|e| e.to_string())?).unwrap();
            for (j, theirs) in f.sentinels.iter().enumerate() {
                if i == j {
                    continue;
                }
                for s in theirs {
                    ensure!(!home.contains(s.as_str()), "{label}: home view of {id} contains {s}");
                    ensure!(!energy_view.contains(s.as_str()), "{label}: energy view of {id} contains {s}");
                }
            }
            responses += 2;
        }
    }
    Ok(format!("{responses} responses across 3 fixtures free of other users' sentinels"))
}

fn comfort_pipeline() -> Outcome {
    let stores = Stores::in_memory();
    for (id, zone) in [("v1", "east"), ("v2", "east"), ("v3", "east"), ("v4", "west")] {
        stores.upsert_user(user(id, "R&D", "1", "B1", zone)).map_err(|e| e.to_string())?;
    }
    let clock = Arc::new(SimClock::new(ts(2022, 7, 4, 14, 0, 0)));
    let api = ConsoleApi::new(stores.clone(), clock.clone());
    let mut last = None;
    for (id, v) in [("v1", 3.0), ("v2", 3.0), ("v3", 2.0)] {
        clock.advance(60);
        last = api.submit_comfort_vote(&uid(id), v).map_err(|e| e.to_string())?.zone_summary;
    }
    let summary = last.ok_or("no zone summary returned")?;
    ensure!(summary.zone == "east" && summary.vote_count == 3, "summary {summary:?}");
    ensure!((summary.mean_vote - 8.0 / 3.0).abs() < 1e-12, "mean {}", summary.mean_vote);
    ensure!(summary.severe, "summary not flagged severe");
    let stored = api.comfort_summaries(true).map_err(|e| e.to_string())?;
    ensure!(stored.iter().any(|s| s.zone == "east" && s.severe), "no severe summary stored");
    ensure!(!stored.iter().any(|s| s.zone == "west" && s.severe), "west flagged");
    let notes = api.manager_notifications(true).map_err(|e| e.to_string())?;
    ensure!(notes.len() == 1 && notes[0].text.contains("east"), "manager notifications {notes:?}");

    let before = stores.sensors.count(&StreamId::new(uid("v1"), SensorIndicator::Comfort)).map_err(|e| e.to_string())?;
    let rejected = api.submit_comfort_vote(&uid("v1"), -4.0);
    ensure!(matches!(rejected, Err(ConsoleError::OutOfRange(_))), "vote -4 gave {rejected:?}");
    let after = stores.sensors.count(&StreamId::new(uid("v1"), SensorIndicator::Comfort)).map_err(|e| e.to_string())?;
    ensure!(before == after, "rejected vote was stored");
    Ok(format!("mean {:.3} over 3 votes flagged severe, 1 manager notification, -4 rejected", summary.mean_vote))
}
