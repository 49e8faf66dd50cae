//! Typed views of report payloads, one per indicator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::time::UtcTimestamp;
use super::vocab::{Field, SensorIndicator};
use super::wire::{Report, UserId, WireError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReadingError {
    #[error("report has indicator {found}, expected {expected}")]
    WrongIndicator { expected: SensorIndicator, found: SensorIndicator },
    #[error("report is missing {0}")]
    Missing(Field),
    #[error("{field} = {value} outside valid range")]
    OutOfRange { field: Field, value: f64 },
    #[error(transparent)]
    Wire(#[from] WireError),
}

fn expect_indicator(report: &Report, expected: SensorIndicator) -> Result<(), ReadingError> {
    if report.indicator() != expected {
        return Err(ReadingError::WrongIndicator { expected, found: report.indicator() });
    }
    Ok(())
}

fn required(report: &Report, field: Field) -> Result<f64, ReadingError> {
    report.number(field).ok_or(ReadingError::Missing(field))
}

fn in_range(field: Field, value: f64, lo: f64, hi: f64) -> Result<f64, ReadingError> {
    if (lo..=hi).contains(&value) {
        Ok(value)
    } else {
        Err(ReadingError::OutOfRange { field, value })
    }
}

/// Desk-level ambient conditions from the sensor stick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AmbientReading {
    /// Unitless light level.
    pub light: f64,
    pub temp_c: f64,
    pub rh: f64,
}

impl AmbientReading {
    pub fn new(light: f64, temp_c: f64, rh: f64) -> Result<Self, ReadingError> {
        Ok(AmbientReading {
            light: in_range(Field::Light, light, 0.0, f64::MAX)?,
            temp_c: in_range(Field::TempC, temp_c, -40.0, 85.0)?,
            rh: in_range(Field::Rh, rh, 0.0, 100.0)?,
        })
    }

    pub fn to_report(&self, id: UserId, ts: UtcTimestamp) -> Result<Report, WireError> {
        Report::new(id, ts, SensorIndicator::Ambient)?
            .with(Field::Light, self.light)?
            .with(Field::TempC, self.temp_c)?
            .with(Field::Rh, self.rh)
    }
}

impl TryFrom<&Report> for AmbientReading {
    type Error = ReadingError;
    fn try_from(report: &Report) -> Result<Self, Self::Error> {
        expect_indicator(report, SensorIndicator::Ambient)?;
        AmbientReading::new(required(report, Field::Light)?, required(report, Field::TempC)?, required(report, Field::Rh)?)
    }
}

/// Energy for one reporting interval plus the state occupancy it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyReading {
    pub interval_wh: f64,
    pub off_s: u64,
    pub sleep_s: u64,
    pub idle_s: u64,
    pub short_idle_s: u64,
    pub work_s: u64,
    pub battery_s: u64,
    pub charging_s: u64,
}

impl EnergyReading {
    pub fn to_report(&self, id: UserId, ts: UtcTimestamp) -> Result<Report, WireError> {
        Report::new(id, ts, SensorIndicator::Energy)?
            .with(Field::IntervalWh, self.interval_wh)?
            .with(Field::OffSeconds, self.off_s as f64)?
            .with(Field::SleepSeconds, self.sleep_s as f64)?
            .with(Field::IdleSeconds, self.idle_s as f64)?
            .with(Field::ShortIdleSeconds, self.short_idle_s as f64)?
            .with(Field::WorkSeconds, self.work_s as f64)?
            .with(Field::BatterySeconds, self.battery_s as f64)?
            .with(Field::ChargingSeconds, self.charging_s as f64)
    }

    pub fn total_seconds(&self) -> u64 {
        self.off_s + self.sleep_s + self.idle_s + self.short_idle_s + self.work_s + self.battery_s
    }
}

impl TryFrom<&Report> for EnergyReading {
    type Error = ReadingError;
    fn try_from(report: &Report) -> Result<Self, Self::Error> {
        expect_indicator(report, SensorIndicator::Energy)?;
        let seconds = |field| -> Result<u64, ReadingError> {
            match report.number(field) {
                None => Ok(0),
                Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as u64),
                Some(v) => Err(ReadingError::OutOfRange { field, value: v }),
            }
        };
        Ok(EnergyReading {
            interval_wh: in_range(Field::IntervalWh, required(report, Field::IntervalWh)?, 0.0, f64::MAX)?,
            off_s: seconds(Field::OffSeconds)?,
            sleep_s: seconds(Field::SleepSeconds)?,
            idle_s: seconds(Field::IdleSeconds)?,
            short_idle_s: seconds(Field::ShortIdleSeconds)?,
            work_s: seconds(Field::WorkSeconds)?,
            battery_s: seconds(Field::BatterySeconds)?,
            charging_s: seconds(Field::ChargingSeconds)?,
        })
    }
}

/// A thermal-sensation vote on the seven-point scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComfortVote {
    pub value: i8,
    pub zone: String,
}

impl ComfortVote {
    pub const MIN: i8 = -3;
    pub const MAX: i8 = 3;

    pub fn new(value: i64, zone: impl Into<String>) -> Result<Self, ReadingError> {
        if !(Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            return Err(ReadingError::OutOfRange { field: Field::Vote, value: value as f64 });
        }
        Ok(ComfortVote { value: value as i8, zone: zone.into() })
    }

    pub fn to_report(&self, id: UserId, ts: UtcTimestamp) -> Result<Report, WireError> {
        Report::new(id, ts, SensorIndicator::Comfort)?
            .with(Field::Vote, self.value as f64)?
            .with(Field::Zone, self.zone.as_str())
    }
}

impl TryFrom<&Report> for ComfortVote {
    type Error = ReadingError;
    fn try_from(report: &Report) -> Result<Self, Self::Error> {
        expect_indicator(report, SensorIndicator::Comfort)?;
        let value = required(report, Field::Vote)?;
        if value.fract() != 0.0 {
            return Err(ReadingError::OutOfRange { field: Field::Vote, value });
        }
        let zone = report.text(Field::Zone).ok_or(ReadingError::Missing(Field::Zone))?;
        ComfortVote::new(value as i64, zone)
    }
}

/// Instantaneous draw and lifetime energy from a plug-load meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeterReading {
    pub watts: f64,
    pub cumulative_kwh: f64,
}

impl MeterReading {
    pub fn new(watts: f64, cumulative_kwh: f64) -> Result<Self, ReadingError> {
        Ok(MeterReading {
            watts: in_range(Field::Watts, watts, 0.0, f64::MAX)?,
            cumulative_kwh: in_range(Field::Kwh, cumulative_kwh, 0.0, f64::MAX)?,
        })
    }

    pub fn to_report(&self, id: UserId, ts: UtcTimestamp) -> Result<Report, WireError> {
        Report::new(id, ts, SensorIndicator::PlugMeter)?
            .with(Field::Watts, self.watts)?
            .with(Field::Kwh, self.cumulative_kwh)
    }
}

impl TryFrom<&Report> for MeterReading {
    type Error = ReadingError;
    fn try_from(report: &Report) -> Result<Self, Self::Error> {
        expect_indicator(report, SensorIndicator::PlugMeter)?;
        MeterReading::new(required(report, Field::Watts)?, required(report, Field::Kwh)?)
    }
}

/// Outdoor conditions at a site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeatherReading {
    pub outdoor_temp_c: f64,
    pub outdoor_rh_pct: f64,
    pub conditions: String,
    pub location: String,
}

impl WeatherReading {
    pub fn new(outdoor_temp_c: f64, outdoor_rh_pct: f64, conditions: impl Into<String>, location: impl Into<String>) -> Result<Self, ReadingError> {
        if !outdoor_temp_c.is_finite() {
            return Err(ReadingError::OutOfRange { field: Field::OutdoorTempC, value: outdoor_temp_c });
        }
        Ok(WeatherReading {
            outdoor_temp_c,
            outdoor_rh_pct: in_range(Field::OutdoorRh, outdoor_rh_pct, 0.0, 100.0)?,
            conditions: conditions.into(),
            location: location.into(),
        })
    }

    pub fn to_report(&self, id: UserId, ts: UtcTimestamp) -> Result<Report, WireError> {
        Report::new(id, ts, SensorIndicator::Weather)?
            .with(Field::OutdoorTempC, self.outdoor_temp_c)?
            .with(Field::OutdoorRh, self.outdoor_rh_pct)?
            .with(Field::Conditions, self.conditions.as_str())?
            .with(Field::Location, self.location.as_str())
    }
}

impl TryFrom<&Report> for WeatherReading {
    type Error = ReadingError;
    fn try_from(report: &Report) -> Result<Self, Self::Error> {
        expect_indicator(report, SensorIndicator::Weather)?;
        WeatherReading::new(
            required(report, Field::OutdoorTempC)?,
            required(report, Field::OutdoorRh)?,
            report.text(Field::Conditions).unwrap_or_default(),
            report.text(Field::Location).unwrap_or(report.id().as_str()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts() -> UtcTimestamp {
        UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 0).unwrap()
    }

    #[test]
    fn ambient_ranges() {
        assert!(AmbientReading::new(50.0, 25.0, 60.0).is_ok());
        assert!(AmbientReading::new(50.0, 25.0, 100.5).is_err());
        assert!(AmbientReading::new(50.0, 90.0, 60.0).is_err());
        assert!(AmbientReading::new(-1.0, 25.0, 60.0).is_err());
    }

    #[test]
    fn vote_bounds() {
        assert!(ComfortVote::new(-3, "z").is_ok());
        assert!(ComfortVote::new(3, "z").is_ok());
        assert!(ComfortVote::new(-4, "z").is_err());
        assert!(ComfortVote::new(4, "z").is_err());
    }

    #[test]
    fn typed_round_trips() {
        let id = UserId::new("u1").unwrap();
        let amb = AmbientReading::new(50.0, 25.0, 60.0).unwrap();
        assert_eq!(AmbientReading::try_from(&amb.to_report(id.clone(), ts()).unwrap()).unwrap(), amb);

        let energy = EnergyReading { interval_wh: 0.25, short_idle_s: 30, ..Default::default() };
        assert_eq!(EnergyReading::try_from(&energy.to_report(id.clone(), ts()).unwrap()).unwrap(), energy);

        let meter = MeterReading::new(85.0, 12.5).unwrap();
        assert_eq!(MeterReading::try_from(&meter.to_report(id.clone(), ts()).unwrap()).unwrap(), meter);

        let weather = WeatherReading::new(18.0, 70.0, "overcast", "hq").unwrap();
        assert_eq!(WeatherReading::try_from(&weather.to_report(id.clone(), ts()).unwrap()).unwrap(), weather);

        let vote = ComfortVote::new(2, "z1").unwrap();
        let report = vote.to_report(id, ts()).unwrap();
        assert_eq!(ComfortVote::try_from(&report).unwrap(), vote);
        assert!(matches!(AmbientReading::try_from(&report), Err(ReadingError::WrongIndicator { .. })));
    }
}
