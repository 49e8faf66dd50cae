use std::path::PathBuf;

use thiserror::Error;
use tracing::warn;

use crate::clock::Clock;
use crate::domain::{UtcTimestamp, WeatherReading};
use crate::store::SiteRecord;

use super::IngestionService;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("weather provider failed: {0}")]
pub struct WeatherError(pub String);

/// Outdoor conditions for a location. Implementations must return in bounded time.
pub trait WeatherProvider: Send {
    fn fetch(&mut self, location: &str) -> Result<WeatherReading, WeatherError>;
}

impl<P: WeatherProvider + ?Sized> WeatherProvider for Box<P> {
    fn fetch(&mut self, location: &str) -> Result<WeatherReading, WeatherError> {
        (**self).fetch(location)
    }
}

/// Reads a JSON `WeatherReading` from a file on every fetch.
#[derive(Debug, Clone)]
pub struct FileWeatherProvider {
    pub path: PathBuf,
}

impl WeatherProvider for FileWeatherProvider {
    fn fetch(&mut self, location: &str) -> Result<WeatherReading, WeatherError> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| WeatherError(e.to_string()))?;
        let mut reading: WeatherReading = serde_json::from_str(&text).map_err(|e| WeatherError(e.to_string()))?;
        if reading.location.is_empty() {
            reading.location = location.to_string();
        }
        WeatherReading::new(reading.outdoor_temp_c, reading.outdoor_rh_pct, reading.conditions, reading.location)
            .map_err(|e| WeatherError(e.to_string()))
    }
}

/// Fixed conditions, for tests and demos.
#[derive(Debug, Clone)]
pub struct StubWeather {
    pub temp_c: f64,
    pub rh: f64,
    pub conditions: String,
}

impl WeatherProvider for StubWeather {
    fn fetch(&mut self, location: &str) -> Result<WeatherReading, WeatherError> {
        WeatherReading::new(self.temp_c, self.rh, self.conditions.clone(), location).map_err(|e| WeatherError(e.to_string()))
    }
}

/// Polls every `interval_min` minutes from the clock's current time until
/// `until` (exclusive). Failed fetches are logged and skipped. Returns the
/// number of readings stored.
pub fn weather_poll_loop<P, C>(
    service: &IngestionService,
    provider: &mut P,
    site: &SiteRecord,
    interval_min: u32,
    clock: &C,
    until: UtcTimestamp,
) -> usize
where
    P: WeatherProvider + ?Sized,
    C: Clock + ?Sized,
{
    let step = i64::from(interval_min.max(1)) * 60;
    let mut stored = 0;
    let mut next = clock.now();
    while next < until {
        clock.sleep_until(next);
        let now = clock.now();
        match provider.fetch(&site.location) {
            Ok(reading) => match reading.to_report(site.site_id.clone(), now) {
                Ok(report) => {
                    let resp = service.handle_sensor_post(&report.to_wire());
                    if resp.is_success() {
                        stored += 1;
                    } else {
                        warn!(status = resp.status, body = %resp.body, "weather reading not stored");
                    }
                }
                Err(e) => warn!(%e, "weather reading not representable"),
            },
            Err(e) => warn!(%e, site = %site.site_id, "weather fetch failed"),
        }
        next = next.add_secs(step);
    }
    stored
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::clock::SimClock;
    use crate::domain::{SensorIndicator, UserId};
    use crate::store::{Stores, StreamId};

    struct EveryOther {
        calls: u32,
    }

    impl WeatherProvider for EveryOther {
        fn fetch(&mut self, location: &str) -> Result<WeatherReading, WeatherError> {
            self.calls += 1;
            if self.calls.is_multiple_of(2) {
                return Err(WeatherError("timeout".into()));
            }
            WeatherReading::new(18.0, 50.0, "cloudy", location).map_err(|e| WeatherError(e.to_string()))
        }
    }

    fn setup() -> (IngestionService, SiteRecord, Arc<SimClock>, UtcTimestamp) {
        let t0 = UtcTimestamp::from_ymd_hms(2022, 3, 14, 0, 0, 0).unwrap();
        let clock = Arc::new(SimClock::new(t0));
        let stores = Stores::in_memory();
        let site = SiteRecord {
            site_id: UserId::new("site-b1").unwrap(),
            building: "B1".into(),
            timezone: "utc".parse().unwrap(),
            location: "Palo Alto, CA".into(),
        };
        stores.register_site(site.clone()).unwrap();
        (IngestionService::new(stores, clock.clone()), site, clock, t0)
    }

    fn weather_docs(service: &IngestionService, site: &SiteRecord) -> usize {
        service.stores().sensors.count(&StreamId::new(site.site_id.clone(), SensorIndicator::Weather)).unwrap()
    }

    #[test]
    fn one_document_per_tick_for_a_day() {
        let (service, site, clock, t0) = setup();
        let mut stub = StubWeather { temp_c: 18.0, rh: 55.0, conditions: "clear".into() };
        let n = weather_poll_loop(&service, &mut stub, &site, 15, clock.as_ref(), t0.add_secs(24 * 3600));
        assert_eq!(n, 96);
        assert_eq!(weather_docs(&service, &site), 96);
    }

    #[test]
    fn failures_skip_cycles() {
        let (service, site, clock, t0) = setup();
        let n = weather_poll_loop(&service, &mut EveryOther { calls: 0 }, &site, 15, clock.as_ref(), t0.add_secs(24 * 3600));
        assert_eq!(n, 48);
        assert_eq!(weather_docs(&service, &site), 48);
    }

    #[test]
    fn file_provider() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.json");
        std::fs::write(&path, r#"{"outdoorTempC": 18.0, "outdoorRhPct": 40.0, "conditions": "sunny", "location": ""}"#).unwrap();
        let mut p = FileWeatherProvider { path: path.clone() };
        let r = p.fetch("Palo Alto").unwrap();
        assert_eq!(r.outdoor_temp_c, 18.0);
        assert_eq!(r.location, "Palo Alto");
        std::fs::write(&path, r#"{"outdoorTempC": 18.0, "outdoorRhPct": 140.0, "conditions": "x", "location": "y"}"#).unwrap();
        assert!(p.fetch("Palo Alto").is_err());
    }
}
