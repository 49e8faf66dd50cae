//! The `"name":value` line format every producer posts to ingestion.
//!
//! A report is one line, brace delimited, with comma separated pairs. Names
//! are always quoted; text values are quoted and numbers are bare. The
//! envelope (`id`, `tsutc`) comes first, the payload follows in its original
//! order, and `indicator` closes the line:
//!
//! ```text
//! {"id": "u1", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor"}
//! ```
//!
//! Whitespace between tokens is ignored by the parser.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::time::UtcTimestamp;
use super::vocab::{Field, SensorIndicator, ValueKind, ENVELOPE_ID, ENVELOPE_INDICATOR, ENVELOPE_TS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: &'static str },
    #[error("missing required field {0:?}")]
    MissingField(&'static str),
    #[error("unknown name {0:?}")]
    UnknownName(String),
    #[error("name {name:?} is not valid for indicator {indicator}")]
    MisplacedName { name: String, indicator: SensorIndicator },
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("unknown indicator {0:?}")]
    UnknownIndicator(String),
    #[error("malformed timestamp {0:?}")]
    MalformedTimestamp(String),
    #[error("malformed number {0:?}")]
    MalformedNumber(String),
    #[error("name {0:?} has a value of the wrong kind")]
    WrongKind(String),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("invalid text value {0:?}")]
    InvalidText(String),
    #[error("timestamp {0} cannot be encoded with a two-digit year")]
    TimestampOutOfRange(UtcTimestamp),
}

/// Identifier carried in the `id` envelope field.
///
/// For occupant reports this is the provisioned user ID; meters and weather
/// sites use their own registered identifiers in the same slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn new(value: impl Into<String>) -> Result<Self, WireError> {
        let value = value.into();
        let valid = !value.is_empty()
            && value.len() <= 128
            && value.chars().all(|c| !c.is_whitespace() && !c.is_control() && !matches!(c, '"' | '\\' | '/'));
        if valid {
            Ok(UserId(value))
        } else {
            Err(WireError::InvalidId(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for UserId {
    type Error = WireError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        UserId::new(value)
    }
}

impl From<UserId> for String {
    fn from(id: UserId) -> String {
        id.0
    }
}

impl std::str::FromStr for UserId {
    type Err = WireError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UserId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(t) => Some(t),
            Value::Number(_) => None,
        }
    }

    fn kind(&self) -> ValueKind {
        match self {
            Value::Number(_) => ValueKind::Number,
            Value::Text(_) => ValueKind::Text,
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<&str> for Value {
    fn from(t: &str) -> Self {
        Value::Text(t.to_string())
    }
}

impl From<String> for Value {
    fn from(t: String) -> Self {
        Value::Text(t)
    }
}

fn valid_text(text: &str) -> bool {
    text.chars().all(|c| !c.is_control() && c != '"' && c != '\\')
}

/// One telemetry envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    id: UserId,
    tsutc: UtcTimestamp,
    indicator: SensorIndicator,
    payload: Vec<(Field, Value)>,
}

impl Report {
    pub fn new(id: UserId, tsutc: UtcTimestamp, indicator: SensorIndicator) -> Result<Self, WireError> {
        if !tsutc.is_wire_representable() {
            return Err(WireError::TimestampOutOfRange(tsutc));
        }
        Ok(Report { id, tsutc, indicator, payload: Vec::new() })
    }

    /// Appends a payload pair after checking it against the vocabulary.
    pub fn push(&mut self, field: Field, value: impl Into<Value>) -> Result<(), WireError> {
        let value = value.into();
        if field.indicator() != self.indicator {
            return Err(WireError::MisplacedName { name: field.name().to_string(), indicator: self.indicator });
        }
        if field.kind() != value.kind() {
            return Err(WireError::WrongKind(field.name().to_string()));
        }
        match &value {
            Value::Number(n) if !n.is_finite() => return Err(WireError::MalformedNumber(n.to_string())),
            Value::Text(t) if !valid_text(t) => return Err(WireError::InvalidText(t.clone())),
            _ => {}
        }
        if self.get(field).is_some() {
            return Err(WireError::DuplicateName(field.name().to_string()));
        }
        self.payload.push((field, value));
        Ok(())
    }

    pub fn with(mut self, field: Field, value: impl Into<Value>) -> Result<Self, WireError> {
        self.push(field, value)?;
        Ok(self)
    }

    pub fn id(&self) -> &UserId {
        &self.id
    }

    pub fn tsutc(&self) -> UtcTimestamp {
        self.tsutc
    }

    pub fn indicator(&self) -> SensorIndicator {
        self.indicator
    }

    pub fn payload(&self) -> &[(Field, Value)] {
        &self.payload
    }

    pub fn get(&self, field: Field) -> Option<&Value> {
        self.payload.iter().find(|(f, _)| *f == field).map(|(_, v)| v)
    }

    pub fn number(&self, field: Field) -> Option<f64> {
        self.get(field).and_then(Value::as_number)
    }

    pub fn text(&self, field: Field) -> Option<&str> {
        self.get(field).and_then(Value::as_text)
    }

    pub fn to_wire(&self) -> String {
        serialize_report(self)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_report(self))
    }
}

fn write_pair(out: &mut String, name: &str, value: &Value) {
    out.push('"');
    out.push_str(name);
    out.push('"');
    match value {
        Value::Text(t) => {
            out.push_str(": \"");
            out.push_str(t);
            out.push('"');
        }
        Value::Number(n) => {
            out.push(':');
            out.push_str(&n.to_string());
        }
    }
}

/// Renders a report as its single-line wire form.
pub fn serialize_report(report: &Report) -> String {
    let mut out = String::with_capacity(64 + report.payload.len() * 16);
    out.push('{');
    write_pair(&mut out, ENVELOPE_ID, &Value::Text(report.id.0.clone()));
    out.push_str(", ");
    write_pair(&mut out, ENVELOPE_TS, &Value::Text(report.tsutc.to_wire()));
    for (field, value) in &report.payload {
        out.push_str(", ");
        write_pair(&mut out, field.name(), value);
    }
    out.push_str(", ");
    write_pair(&mut out, ENVELOPE_INDICATOR, &Value::Text(report.indicator.as_str().to_string()));
    out.push('}');
    out
}

enum RawValue<'a> {
    Text(&'a str),
    Number(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn err(&self, msg: &'static str) -> WireError {
        WireError::Syntax { pos: self.pos, msg }
    }

    fn expect(&mut self, byte: u8, msg: &'static str) -> Result<(), WireError> {
        self.skip_ws();
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(msg))
        }
    }

    fn quoted(&mut self) -> Result<&'a str, WireError> {
        self.expect(b'"', "expected '\"'")?;
        let start = self.pos;
        let end = self.src[start..].find('"').map(|i| start + i).ok_or_else(|| self.err("unterminated string"))?;
        self.pos = end + 1;
        Ok(&self.src[start..end])
    }

    fn value(&mut self) -> Result<RawValue<'a>, WireError> {
        self.skip_ws();
        match self.peek() {
            Some(b'"') => self.quoted().map(RawValue::Text),
            Some(_) => {
                let start = self.pos;
                let len = self.src[start..]
                    .find(|c: char| c == ',' || c == '}' || c.is_whitespace())
                    .unwrap_or(self.src.len() - start);
                self.pos += len;
                if len == 0 {
                    return Err(self.err("expected a value"));
                }
                Ok(RawValue::Number(&self.src[start..start + len]))
            }
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Accepts `-?digits(.digits)?([eE][+-]?digits)?`.
fn parse_number(text: &str) -> Result<f64, WireError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if bytes.first() == Some(&b'-') {
        i += 1;
    }
    let mut ok = digits(&mut i);
    if ok && i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        ok = digits(&mut i);
    }
    if ok && i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        ok = digits(&mut i);
    }
    if !ok || i != bytes.len() {
        return Err(WireError::MalformedNumber(text.to_string()));
    }
    text.parse::<f64>()
        .ok()
        .filter(|n| n.is_finite())
        .ok_or_else(|| WireError::MalformedNumber(text.to_string()))
}

/// Parses one wire line into a typed report.
pub fn parse_report(line: &str) -> Result<Report, WireError> {
    let mut lx = Lexer { src: line, pos: 0 };
    lx.expect(b'{', "expected '{'")?;

    let mut id = None;
    let mut tsutc = None;
    let mut indicator = None;
    let mut pairs: Vec<(Field, RawValue<'_>)> = Vec::new();

    lx.skip_ws();
    if lx.peek() == Some(b'}') {
        lx.pos += 1;
    } else {
        loop {
            let name = lx.quoted()?;
            lx.expect(b':', "expected ':'")?;
            let value = lx.value()?;
            match name {
                ENVELOPE_ID | ENVELOPE_TS | ENVELOPE_INDICATOR => {
                    let slot = match name {
                        ENVELOPE_ID => &mut id,
                        ENVELOPE_TS => &mut tsutc,
                        _ => &mut indicator,
                    };
                    if slot.is_some() {
                        return Err(WireError::DuplicateName(name.to_string()));
                    }
                    match value {
                        RawValue::Text(t) => *slot = Some(t),
                        RawValue::Number(_) => return Err(WireError::WrongKind(name.to_string())),
                    }
                }
                _ => {
                    let field = Field::from_name(name).ok_or_else(|| WireError::UnknownName(name.to_string()))?;
                    if pairs.iter().any(|(f, _)| *f == field) {
                        return Err(WireError::DuplicateName(name.to_string()));
                    }
                    pairs.push((field, value));
                }
            }
            lx.skip_ws();
            match lx.peek() {
                Some(b',') => lx.pos += 1,
                Some(b'}') => {
                    lx.pos += 1;
                    break;
                }
                _ => return Err(lx.err("expected ',' or '}'")),
            }
        }
    }
    lx.skip_ws();
    if lx.pos != line.len() {
        return Err(lx.err("trailing characters after '}'"));
    }

    let id = UserId::new(id.ok_or(WireError::MissingField(ENVELOPE_ID))?)?;
    let ts_text = tsutc.ok_or(WireError::MissingField(ENVELOPE_TS))?;
    let tsutc = UtcTimestamp::parse_wire(ts_text).map_err(|_| WireError::MalformedTimestamp(ts_text.to_string()))?;
    let ind_text = indicator.ok_or(WireError::MissingField(ENVELOPE_INDICATOR))?;
    let indicator = ind_text
        .parse::<SensorIndicator>()
        .map_err(|_| WireError::UnknownIndicator(ind_text.to_string()))?;

    let mut report = Report::new(id, tsutc, indicator)?;
    for (field, raw) in pairs {
        let value = match (field.kind(), raw) {
            (ValueKind::Number, RawValue::Number(n)) => Value::Number(parse_number(n)?),
            (ValueKind::Text, RawValue::Text(t)) => Value::Text(t.to_string()),
            _ => return Err(WireError::WrongKind(field.name().to_string())),
        };
        report.push(field, value)?;
    }
    Ok(report)
}

impl std::str::FromStr for Report {
    type Err = WireError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_report(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CANONICAL: &str =
        r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor"}"#;

    fn ambient_u1() -> Report {
        Report::new(
            UserId::new("u1").unwrap(),
            UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 0).unwrap(),
            SensorIndicator::Ambient,
        )
        .unwrap()
        .with(Field::Light, 50.0)
        .unwrap()
        .with(Field::TempC, 25.0)
        .unwrap()
        .with(Field::Rh, 60.0)
        .unwrap()
    }

    #[test]
    fn serializes_ambient_example() {
        assert_eq!(serialize_report(&ambient_u1()), CANONICAL);
    }

    #[test]
    fn minimal_envelope() {
        let r = Report::new(UserId::new("u1").unwrap(), UtcTimestamp::from_ymd_hms(2022, 3, 14, 9, 30, 0).unwrap(), SensorIndicator::Energy)
            .unwrap();
        assert_eq!(r.to_wire(), r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "indicator": "energysensor"}"#);
        assert_eq!(parse_report(&r.to_wire()).unwrap(), r);
    }

    #[test]
    fn parses_verbatim_layout_with_spaces() {
        let line = r#"{"id": "u1", "tsutc": "03-14-22-9:30:00", "light":50, "tempC":25, "rh":60, "indicator": "ambsensor" }"#;
        assert_eq!(parse_report(line).unwrap(), ambient_u1());
        let spaced = "  {  \"id\" :  \"u1\" ,\t\"tsutc\":\"03-14-22-09:30:00\",\"light\" : 50 ,\"tempC\":25,\"rh\":  60,\"indicator\":\"ambsensor\"}  ";
        assert_eq!(parse_report(spaced).unwrap(), ambient_u1());
    }

    #[test]
    fn rejects_unknown_name() {
        let line = r#"{"id": "u1", "tsutc": "03-14-22-09:30:00", "tempF":77, "indicator": "ambsensor"}"#;
        assert_eq!(parse_report(line), Err(WireError::UnknownName("tempF".into())));
    }

    #[test]
    fn missing_envelope_fields() {
        assert_eq!(parse_report(r#"{"id":"u1"}"#), Err(WireError::MissingField("tsutc")));
        assert_eq!(
            parse_report(r#"{"tsutc": "03-14-22-09:30:00", "indicator": "ambsensor"}"#),
            Err(WireError::MissingField("id"))
        );
        assert_eq!(
            parse_report(r#"{"id":"u1", "tsutc": "03-14-22-09:30:00"}"#),
            Err(WireError::MissingField("indicator"))
        );
        assert_eq!(parse_report("{}"), Err(WireError::MissingField("id")));
    }

    #[test]
    fn malformed_values() {
        let ts = r#"{"id":"u1", "tsutc": "2022-03-14T09:30:00", "indicator": "ambsensor"}"#;
        assert!(matches!(parse_report(ts), Err(WireError::MalformedTimestamp(_))));
        for bad in ["5o", "+5", "1.", ".5", "NaN", "inf", "1e", "--1", "1e999"] {
            let line = format!(r#"{{"id":"u1", "tsutc": "03-14-22-09:30:00", "light":{bad}, "indicator": "ambsensor"}}"#);
            assert!(matches!(parse_report(&line), Err(WireError::MalformedNumber(_))), "{bad}");
        }
    }

    #[test]
    fn rejects_structural_problems() {
        let dup = r#"{"id":"u1", "tsutc": "03-14-22-09:30:00", "rh":1, "rh":2, "indicator": "ambsensor"}"#;
        assert_eq!(parse_report(dup), Err(WireError::DuplicateName("rh".into())));
        let misplaced = r#"{"id":"u1", "tsutc": "03-14-22-09:30:00", "watts":1, "indicator": "ambsensor"}"#;
        assert!(matches!(parse_report(misplaced), Err(WireError::MisplacedName { .. })));
        let unknown_ind = r#"{"id":"u1", "tsutc": "03-14-22-09:30:00", "indicator": "thermo"}"#;
        assert!(matches!(parse_report(unknown_ind), Err(WireError::UnknownIndicator(_))));
        let quoted_number = r#"{"id":"u1", "tsutc": "03-14-22-09:30:00", "rh":"60", "indicator": "ambsensor"}"#;
        assert!(matches!(parse_report(quoted_number), Err(WireError::WrongKind(_))));
        for junk in ["", "{", r#"{"id":"u1""#, r#"{"id":"u1"} x"#, r#"{"id" "u1"}"#, r#"{"id":"u1",}"#] {
            assert!(matches!(parse_report(junk), Err(WireError::Syntax { .. })), "{junk:?}");
        }
    }

    #[test]
    fn text_values_keep_interior_spaces() {
        let line = r#"{"id": "hq", "tsutc": "03-14-22-09:30:00", "conditions": "light rain", "indicator": "weather"}"#;
        let r = parse_report(line).unwrap();
        assert_eq!(r.text(Field::Conditions), Some("light rain"));
        assert_eq!(r.to_wire(), line);
    }

    fn arb_report() -> impl Strategy<Value = Report> {
        let indicator = prop::sample::select(SensorIndicator::ALL.to_vec());
        (
            "[a-zA-Z0-9_.-]{1,16}",
            946_684_800i64..4_102_444_799,
            indicator,
            prop::collection::vec((any::<prop::sample::Index>(), -1.0e9f64..1.0e9, "[a-z ]{0,12}"), 0..8),
        )
            .prop_map(|(id, secs, indicator, values)| {
                let mut r = Report::new(UserId::new(id).unwrap(), UtcTimestamp::from_unix(secs), indicator).unwrap();
                let fields: Vec<Field> =
                    super::super::vocab::VOCABULARY.iter().filter(|s| s.indicator == indicator).map(|s| s.field).collect();
                for (idx, n, t) in values {
                    let field = fields[idx.index(fields.len())];
                    let value = match field.kind() {
                        ValueKind::Number => Value::Number(n),
                        ValueKind::Text => Value::Text(t),
                    };
                    let _ = r.push(field, value);
                }
                r
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(report in arb_report()) {
            let line = serialize_report(&report);
            let parsed = parse_report(&line).unwrap();
            prop_assert_eq!(&parsed, &report);
            prop_assert_eq!(serialize_report(&parsed), line);
        }
    }
}
