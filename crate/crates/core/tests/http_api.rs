use std::sync::Arc;

use clap::Parser;
use reqwest::blocking::Client;
use serde_json::{json, Value};

use poem_core::agent::{Agent, AgentConfig, FixedAmbient, HttpTransport};
use poem_core::clock::SimClock;
use poem_core::console::ConsoleApi;
use poem_core::domain::{AmbientReading, SensorIndicator, UserId, UtcTimestamp};
use poem_core::http::{spawn_server, AppState, ServerHandle};
use poem_core::ingest::IngestionService;
use poem_core::store::{ProvisionArgs, Stores, StreamId};
use poem_core::sumve::{PowerState, SimulatedObserver};

const SAMPLE_LINE: &str =
    r#"{"id": "a", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor" }"#;

fn t0() -> UtcTimestamp {
    UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 0).unwrap()
}

fn provision(stores: &Stores, id: &str, dept: &str) {
    let office = format!("o-{id}");
    let args = ProvisionArgs::try_parse_from([
        "provision", "--user-id", id, "--office", &office, "--department", dept, "--floor", "2", "--building", "B1",
        "--zone", "z1", "--machine-type", "desktop", "--p-idle", "10", "--p-sidle", "30", "--p-sleep", "2", "--p-off", "1",
    ])
    .unwrap();
    stores.provision_user(&args).unwrap();
}

struct Fixture {
    stores: Stores,
    server: ServerHandle,
    client: Client,
}

impl Fixture {
    fn new() -> Self {
        let stores = Stores::in_memory();
        for (id, dept) in [("a", "R&D"), ("b", "R&D"), ("c", "R&D"), ("d", "Ops")] {
            provision(&stores, id, dept);
        }
        let clock = Arc::new(SimClock::new(t0().add_secs(5)));
        let state = AppState {
            ingest: IngestionService::new(stores.clone(), clock.clone()),
            console: ConsoleApi::new(stores.clone(), clock),
        };
        let server = spawn_server(state, "127.0.0.1:0".parse().unwrap()).unwrap();
        Fixture { stores, server, client: Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.server.base_url(), path)
    }

    fn post_text(&self, path: &str, body: &str) -> (u16, String) {
        let r = self.client.post(self.url(path)).body(body.to_string()).send().unwrap();
        (r.status().as_u16(), r.text().unwrap())
    }

    fn post_json(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).header("content-type", "application/json").body(body.to_string()).send().unwrap();
        let status = r.status().as_u16();
        (status, serde_json::from_str(&r.text().unwrap()).unwrap_or(Value::Null))
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().unwrap();
        let status = r.status().as_u16();
        (status, serde_json::from_str(&r.text().unwrap()).unwrap_or(Value::Null))
    }
}

#[test]
fn sensor_intake_statuses() {
    let f = Fixture::new();
    assert_eq!(f.post_text("/sensor", SAMPLE_LINE), (200, "stored".to_string()));
    let tempf = SAMPLE_LINE.replace("\"tempC\"", "\"tempF\"");
    assert_eq!(f.post_text("/sensor", &tempf).0, 400);
    assert_eq!(f.post_text("/sensor", "not json").0, 400);
    assert_eq!(f.post_text("/sensor", &SAMPLE_LINE.replace("\"a\"", "\"zz\"")).0, 404);
    let count = f.stores.sensors.count(&StreamId::new(UserId::new("a").unwrap(), SensorIndicator::Ambient)).unwrap();
    assert_eq!(count, 1);
    let r = f.client.get(f.url("/health")).send().unwrap();
    assert_eq!(r.status().as_u16(), 200);
}

#[test]
fn config_endpoint_serves_profile() {
    let f = Fixture::new();
    let (status, body) = f.get("/config/a");
    assert_eq!(status, 200);
    assert_eq!(body["powerProfile"]["pSidle"], 30.0);
    assert_eq!(body["monitorAttached"], false);
    assert_eq!(f.get("/config/nobody").0, 404);
}

#[test]
fn home_view_and_votes() {
    let f = Fixture::new();
    f.post_text("/sensor", SAMPLE_LINE);
    let (status, home) = f.get("/api/home/a");
    assert_eq!(status, 200);
    assert_eq!(home["latestAmbient"]["tempC"], 25.0);
    assert_eq!(home["comfortWidget"]["zone"], "z1");
    assert_eq!(f.get("/api/home/nobody").0, 404);

    let (status, vote) = f.post_json("/api/comfort/a", json!({ "value": 3 }));
    assert_eq!(status, 200);
    assert_eq!(vote["vote"]["value"], 3);
    assert_eq!(f.post_json("/api/comfort/a", json!({ "value": -4 })).0, 422);
    assert_eq!(f.post_json("/api/comfort/a", json!({ "value": 0.5 })).0, 422);
}

#[test]
fn targets_and_manager_endpoints() {
    let f = Fixture::new();
    assert_eq!(f.post_json("/api/target/a", json!({ "targetWh": 0 })).0, 400);
    assert_eq!(f.post_json("/api/target/a", json!({ "targetWh": 120.5 })).0, 200);

    let notice = json!({ "audience": { "kind": "group", "group": "department:R&D" }, "text": "Cooling restored by 3pm" });
    assert_eq!(f.post_json("/api/notify", notice.clone()).0, 403);
    let (status, delivery) = f.post_json("/api/notify?manager=true", notice);
    assert_eq!(status, 200, "{delivery}");
    assert_eq!(delivery["recipients"].as_array().unwrap().len(), 3);
    assert_eq!(f.get("/api/home/b").1["notifications"].as_array().unwrap().len(), 1);
    assert!(f.get("/api/home/d").1["notifications"].as_array().unwrap().is_empty());
    let bad_group = json!({ "audience": { "kind": "group", "group": "department:Nope" }, "text": "x" });
    assert_eq!(f.post_json("/api/notify?manager=true", bad_group).0, 404);

    assert_eq!(f.get("/api/report?groupBy=department&from=2022-03-14&to=2022-03-15").0, 403);
    let (status, rows) = f.get("/api/report?groupBy=department&from=2022-03-14&to=2022-03-15&manager=true");
    assert_eq!(status, 200);
    assert!(rows.as_array().unwrap().is_empty());
    assert_eq!(f.get("/api/report?groupBy=department&from=2022-03-15&to=2022-03-14&manager=true").0, 400);

    let (status, zones) = f.get("/api/rogue?from=2022-03-14T00:00:00Z&to=2022-03-15T00:00:00Z");
    assert_eq!(status, 200);
    assert!(zones.as_array().unwrap().is_empty());
    assert_eq!(f.get("/api/manager/notifications?manager=true").0, 200);
    assert_eq!(f.get("/api/manager/comfort?manager=true").0, 200);
    assert_eq!(f.get("/api/meters/flags?from=2022-03-14T00:00:00Z&to=2022-03-15T00:00:00Z&manager=true").0, 200);
}

#[test]
fn agent_reports_over_http() {
    let f = Fixture::new();
    let mut config = AgentConfig::new(UserId::new("a").unwrap());
    config.ingestion_url = f.server.base_url();
    let mut transport = HttpTransport::new(&config.ingestion_url).unwrap();
    let profile = poem_core::agent::fetch_sumve_config(&mut transport, &config).unwrap().power_profile;
    let observer = SimulatedObserver::constant(PowerState::Work, t0(), 600);
    let ambient = FixedAmbient(AmbientReading::new(50.0, 25.0, 60.0).unwrap());
    let mut agent = Agent::new(config, profile, observer, ambient, transport, t0());
    let clock = SimClock::new(t0());
    agent.run_until(&clock, t0().add_secs(90));
    assert_eq!(agent.sender().stats().sent, 6);
    let user = UserId::new("a").unwrap();
    assert_eq!(f.stores.sensors.count(&StreamId::new(user.clone(), SensorIndicator::Ambient)).unwrap(), 3);
    assert_eq!(f.stores.sensors.count(&StreamId::new(user, SensorIndicator::Energy)).unwrap(), 3);
}
