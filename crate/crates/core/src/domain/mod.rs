//! Shared vocabulary, timestamps and the wire format.

mod readings;
mod time;
mod vocab;
mod wire;

pub use readings::{AmbientReading, ComfortVote, EnergyReading, MeterReading, ReadingError, WeatherReading};
pub use time::{to_local, TimeError, TimeZoneSpec, UtcTimestamp};
pub use vocab::{Field, FieldSpec, SensorIndicator, ValueKind, VOCABULARY};
pub use wire::{parse_report, serialize_report, Report, UserId, Value, WireError};
