//! The sensor DB writer: validates pushed reports and appends them to the store.

mod weather;

use std::sync::Arc;

use serde_json::json;
use tracing::{debug, warn};

use crate::agent::{Transport, TransportError};
use crate::clock::Clock;
use crate::domain::{
    parse_report, AmbientReading, ComfortVote, EnergyReading, MeterReading, ReadingError, Report, SensorIndicator,
    UserId, WeatherReading,
};
use crate::store::{DocFlag, SensorDocument, StoreError, Stores, StreamId};

pub use weather::{weather_poll_loop, FileWeatherProvider, StubWeather, WeatherError, WeatherProvider};

/// Status and plain-text body of an intake request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestResponse {
    pub status: u16,
    pub body: String,
}

impl IngestResponse {
    fn new(status: u16, body: impl Into<String>) -> Self {
        IngestResponse { status, body: body.into() }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

fn validate(report: &Report) -> Result<(), ReadingError> {
    match report.indicator() {
        SensorIndicator::Ambient => AmbientReading::try_from(report).map(drop),
        SensorIndicator::Energy => EnergyReading::try_from(report).map(drop),
        SensorIndicator::PlugMeter => MeterReading::try_from(report).map(drop),
        SensorIndicator::Weather => WeatherReading::try_from(report).map(drop),
        SensorIndicator::Comfort => ComfortVote::try_from(report).map(drop),
    }
}

#[derive(Clone)]
pub struct IngestionService {
    stores: Stores,
    clock: Arc<dyn Clock>,
}

impl IngestionService {
    pub fn new(stores: Stores, clock: Arc<dyn Clock>) -> Self {
        IngestionService { stores, clock }
    }

    pub fn stores(&self) -> &Stores {
        &self.stores
    }

    fn parse(body: &str) -> Result<Report, IngestResponse> {
        let report = parse_report(body.trim()).map_err(|e| IngestResponse::new(400, e.to_string()))?;
        validate(&report).map_err(|e| IngestResponse::new(400, e.to_string()))?;
        Ok(report)
    }

    fn store(&self, doc: SensorDocument) -> IngestResponse {
        match self.stores.sensors.append(doc) {
            Ok(_) => IngestResponse::new(200, "stored"),
            Err(StoreError::UnknownStream(s)) => IngestResponse::new(404, format!("no stream {s}")),
            Err(e) => {
                warn!(%e, "append failed");
                IngestResponse::new(503, e.to_string())
            }
        }
    }

    /// Intake for agent reports (ambient, energy, comfort) and site weather.
    pub fn handle_sensor_post(&self, body: &str) -> IngestResponse {
        let report = match Self::parse(body) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        if report.indicator() == SensorIndicator::PlugMeter {
            return IngestResponse::new(400, "meter readings are posted to /meter");
        }
        let stream = StreamId::of(&report);
        if !self.stores.sensors.has_stream(&stream) {
            return IngestResponse::new(404, format!("{} is not provisioned", report.id()));
        }
        debug!(%stream, "sensor report");
        self.store(SensorDocument::from_report(&report, self.clock.now()))
    }

    /// Intake for plug-load meters. A cumulative counter lower than the
    /// latest stored one is accepted and flagged.
    pub fn handle_meter_post(&self, body: &str) -> IngestResponse {
        let report = match Self::parse(body) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        if report.indicator() != SensorIndicator::PlugMeter {
            return IngestResponse::new(400, format!("expected plugmeter, got {}", report.indicator()));
        }
        if self.stores.meta.get_meter(report.id()).is_none() {
            return IngestResponse::new(404, format!("meter {} is not registered", report.id()));
        }
        let stream = StreamId::of(&report);
        let reading = MeterReading::try_from(&report).expect("validated");
        let mut doc = SensorDocument::from_report(&report, self.clock.now());
        match self.stores.sensors.latest(&stream) {
            Ok(Some(prev)) => {
                if prev.number(crate::domain::Field::Kwh).is_some_and(|k| reading.cumulative_kwh < k) {
                    warn!(meter = %report.id(), "cumulative counter went backwards");
                    doc.flags.push(DocFlag::CounterRegression);
                }
            }
            Ok(None) => {}
            Err(StoreError::UnknownStream(s)) => return IngestResponse::new(404, format!("no stream {s}")),
            Err(e) => return IngestResponse::new(503, e.to_string()),
        }
        self.store(doc)
    }

    /// JSON body for `GET /config/{userId}`: the power profile the energy sensor needs.
    pub fn sumve_config(&self, user: &str) -> IngestResponse {
        let Ok(id) = UserId::new(user) else {
            return IngestResponse::new(400, "invalid user id");
        };
        match self.stores.sumve_config(&id) {
            Ok((profile, monitor)) => {
                IngestResponse::new(200, json!({"powerProfile": profile, "monitorAttached": monitor}).to_string())
            }
            Err(e) => IngestResponse::new(404, e.to_string()),
        }
    }

    /// Dispatches an in-process POST by path.
    pub fn post(&self, path: &str, body: &str) -> IngestResponse {
        match path {
            "/sensor" => self.handle_sensor_post(body),
            "/meter" => self.handle_meter_post(body),
            _ => IngestResponse::new(404, "no such endpoint"),
        }
    }
}

/// Delivers agent traffic straight to an in-process service.
#[derive(Clone)]
pub struct LoopbackTransport {
    pub service: IngestionService,
}

impl Transport for LoopbackTransport {
    fn post(&mut self, path: &str, body: &str) -> Result<u16, TransportError> {
        Ok(self.service.post(path, body).status)
    }

    fn get(&mut self, path: &str) -> Result<(u16, String), TransportError> {
        match path.strip_prefix("/config/") {
            Some(user) => {
                let r = self.service.sumve_config(user);
                Ok((r.status, r.body))
            }
            None => Ok((404, String::new())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use crate::domain::{Field, UtcTimestamp};
    use crate::store::{MeterRecord, ProvisionArgs};
    use clap::Parser;

    const SAMPLE_LINE: &str =
        r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor" }"#;

    fn service() -> IngestionService {
        let stores = Stores::in_memory();
        let args = ProvisionArgs::try_parse_from([
            "provision", "--user-id", "u1", "--office", "1", "--department", "R&D", "--floor", "1", "--building", "B1",
            "--zone", "z1", "--machine-type", "desktop", "--p-idle", "10", "--p-sidle", "30", "--p-sleep", "2", "--p-off", "1",
        ])
        .unwrap();
        stores.provision_user(&args).unwrap();
        stores
            .register_meter(MeterRecord { meter_id: UserId::new("m1").unwrap(), device: "printer-2F".into(), building: None })
            .unwrap();
        let clock = Arc::new(SimClock::new(UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 2).unwrap()));
        IngestionService::new(stores, clock)
    }

    fn ambient_stream(id: &str) -> StreamId {
        StreamId::new(UserId::new(id).unwrap(), SensorIndicator::Ambient)
    }

    #[test]
    fn sample_line_is_stored_with_receive_time() {
        let s = service();
        assert_eq!(s.handle_sensor_post(SAMPLE_LINE).status, 200);
        let doc = s.stores().sensors.latest(&ambient_stream("u1")).unwrap().unwrap();
        assert_eq!(doc.to_report().unwrap(), parse_report(SAMPLE_LINE).unwrap());
        assert_eq!(doc.receive_time, UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 2).unwrap());
    }

    #[test]
    fn unknown_user_is_404_and_not_stored() {
        let s = service();
        assert_eq!(s.handle_sensor_post(&SAMPLE_LINE.replace("u1", "u9")).status, 404);
        assert_eq!(s.stores().sensors.count(&ambient_stream("u1")).unwrap(), 0);
    }

    #[test]
    fn malformed_bodies_are_400() {
        let s = service();
        assert_eq!(s.handle_sensor_post(r#"{"id":"u1"}"#).status, 400);
        assert_eq!(s.handle_sensor_post(&SAMPLE_LINE.replace("tempC", "tempF")).status, 400);
        assert_eq!(s.handle_sensor_post(&SAMPLE_LINE.replace(r#""rh":60"#, r#""rh":160"#)).status, 400);
        assert_eq!(s.handle_sensor_post("").status, 400);
        assert_eq!(s.stores().sensors.count(&ambient_stream("u1")).unwrap(), 0);
    }

    #[test]
    fn meter_intake_and_regression_flag() {
        let s = service();
        let line = |ts: &str, kwh: f64| format!(r#"{{"id": "m1", "tsutc": "{ts}", "watts":85, "kwh":{kwh}, "indicator": "plugmeter"}}"#);
        assert_eq!(s.handle_meter_post(&line("03-14-22-09:00:00", 12.5)).status, 200);
        let stream = StreamId::new(UserId::new("m1").unwrap(), SensorIndicator::PlugMeter);
        let first = s.stores().sensors.latest(&stream).unwrap().unwrap();
        assert_eq!(first.number(Field::Watts), Some(85.0));
        assert_eq!(first.number(Field::Kwh), Some(12.5));
        assert!(first.flags.is_empty());

        assert_eq!(s.handle_meter_post(&line("03-14-22-09:15:00", 12.0)).status, 200);
        let second = s.stores().sensors.latest(&stream).unwrap().unwrap();
        assert_eq!(second.flags, vec![DocFlag::CounterRegression]);

        assert_eq!(s.handle_meter_post(&line("03-14-22-09:15:00", 1.0).replace("m1", "m2")).status, 404);
        assert_eq!(s.handle_meter_post(SAMPLE_LINE).status, 400);
        assert_eq!(s.handle_sensor_post(&line("03-14-22-09:30:00", 13.0)).status, 400);
    }

    #[test]
    fn config_lookup() {
        let s = service();
        let r = s.sumve_config("u1");
        assert_eq!(r.status, 200);
        let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["powerProfile"]["pSidle"], 30.0);
        assert_eq!(s.sumve_config("nobody").status, 404);
    }
}
