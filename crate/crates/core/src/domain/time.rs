use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while reading timestamps or time zones.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("malformed timestamp {0:?}, expected mm-dd-yy-h:mm:ss")]
    Malformed(String),
    #[error("timestamp year {0} outside 2000-2099")]
    YearOutOfRange(i32),
    #[error("invalid time zone {0:?}")]
    InvalidZone(String),
}

/// An instant in UTC at one-second resolution, stored as Unix seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtcTimestamp(i64);

impl UtcTimestamp {
    pub const fn from_unix(secs: i64) -> Self {
        UtcTimestamp(secs)
    }

    pub const fn unix(self) -> i64 {
        self.0
    }

    /// Builds a timestamp from calendar fields; `None` if the fields do not name a real instant.
    pub fn from_ymd_hms(year: i32, month: u32, day: u32, hour: u32, min: u32, sec: u32) -> Option<Self> {
        let naive = NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, min, sec)?;
        Some(Self::from_naive_utc(naive))
    }

    pub fn from_naive_utc(naive: NaiveDateTime) -> Self {
        UtcTimestamp(naive.and_utc().timestamp())
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).expect("timestamp within chrono range")
    }

    pub fn now() -> Self {
        UtcTimestamp(Utc::now().timestamp())
    }

    pub const fn add_secs(self, secs: i64) -> Self {
        UtcTimestamp(self.0 + secs)
    }

    pub const fn secs_since(self, earlier: UtcTimestamp) -> i64 {
        self.0 - earlier.0
    }

    /// True when the year fits the two-digit wire encoding.
    pub fn is_wire_representable(self) -> bool {
        (2000..=2099).contains(&self.to_datetime().year())
    }

    /// Renders the `mm-dd-yy-HH:mm:ss` wire form with a zero-padded hour.
    pub fn to_wire(self) -> String {
        let dt = self.to_datetime();
        format!(
            "{:02}-{:02}-{:02}-{:02}:{:02}:{:02}",
            dt.month(),
            dt.day(),
            dt.year() % 100,
            dt.hour(),
            dt.minute(),
            dt.second()
        )
    }

    /// Parses the wire form. The hour may have one or two digits; every
    /// other field must have exactly two.
    pub fn parse_wire(text: &str) -> Result<Self, TimeError> {
        let malformed = || TimeError::Malformed(text.to_string());
        let mut date_parts = text.splitn(4, '-');
        let month = two_digits(date_parts.next()).ok_or_else(malformed)?;
        let day = two_digits(date_parts.next()).ok_or_else(malformed)?;
        let year = two_digits(date_parts.next()).ok_or_else(malformed)?;
        let clock = date_parts.next().ok_or_else(malformed)?;

        let mut clock_parts = clock.split(':');
        let hour_text = clock_parts.next().ok_or_else(malformed)?;
        if hour_text.is_empty() || hour_text.len() > 2 || !hour_text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let hour: u32 = hour_text.parse().map_err(|_| malformed())?;
        let min = two_digits(clock_parts.next()).ok_or_else(malformed)?;
        let sec = two_digits(clock_parts.next()).ok_or_else(malformed)?;
        if clock_parts.next().is_some() {
            return Err(malformed());
        }
        Self::from_ymd_hms(2000 + year as i32, month, day, hour, min, sec).ok_or_else(malformed)
    }

    /// Expresses this instant in the given zone.
    pub fn to_local(self, zone: &TimeZoneSpec) -> DateTime<FixedOffset> {
        zone.localize(self)
    }

    pub fn from_local(local: &DateTime<FixedOffset>) -> Self {
        UtcTimestamp(local.timestamp())
    }

    pub fn to_rfc3339(self) -> String {
        self.to_datetime().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }

    pub fn parse_rfc3339(text: &str) -> Result<Self, TimeError> {
        DateTime::parse_from_rfc3339(text)
            .map(|dt| UtcTimestamp(dt.timestamp()))
            .map_err(|_| TimeError::Malformed(text.to_string()))
    }
}

fn two_digits(part: Option<&str>) -> Option<u32> {
    let part = part?;
    if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    part.parse().ok()
}

impl fmt::Display for UtcTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl Serialize for UtcTimestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for UtcTimestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        UtcTimestamp::parse_rfc3339(&text).map_err(serde::de::Error::custom)
    }
}

/// A presentation time zone: a fixed offset such as `+02:00` or an IANA name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeZoneSpec {
    Fixed(FixedOffset),
    Named(chrono_tz::Tz),
}

impl TimeZoneSpec {
    pub fn utc() -> Self {
        TimeZoneSpec::Fixed(FixedOffset::east_opt(0).expect("zero offset"))
    }

    pub fn fixed_hours(hours: i32) -> Option<Self> {
        FixedOffset::east_opt(hours * 3600).map(TimeZoneSpec::Fixed)
    }

    pub fn localize(&self, ts: UtcTimestamp) -> DateTime<FixedOffset> {
        let utc = ts.to_datetime();
        match self {
            TimeZoneSpec::Fixed(offset) => utc.with_timezone(offset),
            TimeZoneSpec::Named(tz) => utc.with_timezone(tz).fixed_offset(),
        }
    }

    /// The UTC instant of local midnight starting `date`. For named zones where
    /// midnight does not exist (DST gap), the earliest valid instant after it.
    pub fn start_of_day(&self, date: NaiveDate) -> UtcTimestamp {
        self.resolve_local(date.and_hms_opt(0, 0, 0).expect("midnight"))
    }

    /// The earliest UTC instant showing `local` on the wall clock, moving
    /// forward in 15-minute steps out of a DST gap.
    pub fn resolve_local(&self, local: NaiveDateTime) -> UtcTimestamp {
        match self {
            TimeZoneSpec::Fixed(offset) => {
                UtcTimestamp(offset.from_local_datetime(&local).single().expect("fixed offsets are unambiguous").timestamp())
            }
            TimeZoneSpec::Named(tz) => {
                let mut probe = local;
                loop {
                    if let Some(dt) = tz.from_local_datetime(&probe).earliest() {
                        return UtcTimestamp(dt.timestamp());
                    }
                    probe += chrono::Duration::minutes(15);
                }
            }
        }
    }

    /// Local calendar date of an instant.
    pub fn local_date(&self, ts: UtcTimestamp) -> NaiveDate {
        self.localize(ts).date_naive()
    }
}

impl FromStr for TimeZoneSpec {
    type Err = TimeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("utc") || text == "Z" {
            return Ok(TimeZoneSpec::utc());
        }
        if let Some(offset) = parse_offset(text) {
            return Ok(TimeZoneSpec::Fixed(offset));
        }
        text.parse::<chrono_tz::Tz>()
            .map(TimeZoneSpec::Named)
            .map_err(|_| TimeError::InvalidZone(text.to_string()))
    }
}

fn parse_offset(text: &str) -> Option<FixedOffset> {
    let (sign, rest) = match text.as_bytes().first()? {
        b'+' => (1, &text[1..]),
        b'-' => (-1, &text[1..]),
        _ => return None,
    };
    let (hours, minutes) = match rest.split_once(':') {
        Some((h, m)) => (h, m),
        None => (rest, "0"),
    };
    if hours.is_empty() || hours.len() > 2 || !hours.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !minutes.bytes().all(|b| b.is_ascii_digit()) || minutes.len() > 2 {
        return None;
    }
    let hours: i32 = hours.parse().ok()?;
    let minutes: i32 = minutes.parse().ok()?;
    if minutes >= 60 {
        return None;
    }
    FixedOffset::east_opt(sign * (hours * 3600 + minutes * 60))
}

impl fmt::Display for TimeZoneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeZoneSpec::Fixed(offset) => write!(f, "{offset}"),
            TimeZoneSpec::Named(tz) => write!(f, "{}", tz.name()),
        }
    }
}

impl Serialize for TimeZoneSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TimeZoneSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Converts a UTC instant to the local date-time of a zone given by name or offset.
pub fn to_local(ts: UtcTimestamp, zone: &str) -> Result<DateTime<FixedOffset>, TimeError> {
    let zone: TimeZoneSpec = zone.parse()?;
    Ok(zone.localize(ts))
}
