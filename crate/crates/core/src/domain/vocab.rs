//! The closed vocabulary of names that may appear on the wire.
//!
//! Every payload name used anywhere in the system is declared exactly once in
//! [`VOCABULARY`], together with its value kind, the indicators it may appear
//! under and its implicit engineering unit. The parser rejects anything else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The sensor type a report comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorIndicator {
    #[serde(rename = "ambsensor")]
    Ambient,
    #[serde(rename = "energysensor")]
    Energy,
    #[serde(rename = "plugmeter")]
    PlugMeter,
    Weather,
    Comfort,
}

impl SensorIndicator {
    pub const ALL: [SensorIndicator; 5] = [
        SensorIndicator::Ambient,
        SensorIndicator::Energy,
        SensorIndicator::PlugMeter,
        SensorIndicator::Weather,
        SensorIndicator::Comfort,
    ];

    /// Streams created for every provisioned user.
    pub const PER_USER: [SensorIndicator; 3] =
        [SensorIndicator::Ambient, SensorIndicator::Energy, SensorIndicator::Comfort];

    pub const fn as_str(self) -> &'static str {
        match self {
            SensorIndicator::Ambient => "ambsensor",
            SensorIndicator::Energy => "energysensor",
            SensorIndicator::PlugMeter => "plugmeter",
            SensorIndicator::Weather => "weather",
            SensorIndicator::Comfort => "comfort",
        }
    }
}

impl fmt::Display for SensorIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorIndicator {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorIndicator::ALL.into_iter().find(|i| i.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Number,
    Text,
}

/// A payload name from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Light,
    TempC,
    Rh,
    IntervalWh,
    OffSeconds,
    SleepSeconds,
    IdleSeconds,
    ShortIdleSeconds,
    WorkSeconds,
    BatterySeconds,
    ChargingSeconds,
    Watts,
    Kwh,
    OutdoorTempC,
    OutdoorRh,
    Conditions,
    Location,
    Vote,
    Zone,
}

/// One row of the vocabulary table.
#[derive(Debug, Clone, Copy)]
pub struct FieldSpec {
    pub field: Field,
    pub name: &'static str,
    pub kind: ValueKind,
    pub indicator: SensorIndicator,
    pub unit: &'static str,
}

const fn row(field: Field, name: &'static str, kind: ValueKind, indicator: SensorIndicator, unit: &'static str) -> FieldSpec {
    FieldSpec { field, name, kind, indicator, unit }
}

use SensorIndicator as I;
use ValueKind::{Number as N, Text as T};

pub const VOCABULARY: &[FieldSpec] = &[
    row(Field::Light, "light", N, I::Ambient, "unitless sensor level"),
    row(Field::TempC, "tempC", N, I::Ambient, "degrees Celsius"),
    row(Field::Rh, "rh", N, I::Ambient, "percent relative humidity"),
    row(Field::IntervalWh, "intervalWh", N, I::Energy, "watt-hours since previous report"),
    row(Field::OffSeconds, "offS", N, I::Energy, "seconds"),
    row(Field::SleepSeconds, "sleepS", N, I::Energy, "seconds"),
    row(Field::IdleSeconds, "idleS", N, I::Energy, "seconds"),
    row(Field::ShortIdleSeconds, "sidleS", N, I::Energy, "seconds"),
    row(Field::WorkSeconds, "workS", N, I::Energy, "seconds"),
    row(Field::BatterySeconds, "batteryS", N, I::Energy, "seconds"),
    row(Field::ChargingSeconds, "chargingS", N, I::Energy, "seconds"),
    row(Field::Watts, "watts", N, I::PlugMeter, "watts"),
    row(Field::Kwh, "kwh", N, I::PlugMeter, "cumulative kilowatt-hours"),
    row(Field::OutdoorTempC, "outTempC", N, I::Weather, "degrees Celsius"),
    row(Field::OutdoorRh, "outRh", N, I::Weather, "percent relative humidity"),
    row(Field::Conditions, "conditions", T, I::Weather, "free text"),
    row(Field::Location, "location", T, I::Weather, "site identifier"),
    row(Field::Vote, "vote", N, I::Comfort, "thermal sensation, -3..+3"),
    row(Field::Zone, "zone", T, I::Comfort, "HVAC zone identifier"),
];

impl Field {
    pub fn spec(self) -> &'static FieldSpec {
        VOCABULARY.iter().find(|r| r.field == self).expect("every field has a vocabulary row")
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn kind(self) -> ValueKind {
        self.spec().kind
    }

    pub fn indicator(self) -> SensorIndicator {
        self.spec().indicator
    }

    pub fn from_name(name: &str) -> Option<Field> {
        VOCABULARY.iter().find(|r| r.name == name).map(|r| r.field)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Envelope names; always present and never part of the payload.
pub const ENVELOPE_ID: &str = "id";
pub const ENVELOPE_TS: &str = "tsutc";
pub const ENVELOPE_INDICATOR: &str = "indicator";

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_declared_once() {
        let names: HashSet<_> = VOCABULARY.iter().map(|r| r.name).collect();
        assert_eq!(names.len(), VOCABULARY.len());
        for envelope in [ENVELOPE_ID, ENVELOPE_TS, ENVELOPE_INDICATOR] {
            assert!(!names.contains(envelope));
        }
    }

    #[test]
    fn indicator_tokens_round_trip() {
        for i in SensorIndicator::ALL {
            assert_eq!(i.as_str().parse::<SensorIndicator>(), Ok(i));
        }
        assert!("tempsensor".parse::<SensorIndicator>().is_err());
    }
}
