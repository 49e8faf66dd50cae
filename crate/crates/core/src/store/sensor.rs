//! Schemaless time-series store keyed by stream.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{Field, Report, SensorIndicator, UserId, UtcTimestamp, Value, WireError};

use super::StoreError;

/// Key of one stream: the pairing of a source identifier and an indicator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamId {
    pub owner: UserId,
    pub indicator: SensorIndicator,
}

impl StreamId {
    pub fn new(owner: UserId, indicator: SensorIndicator) -> Self {
        StreamId { owner, indicator }
    }

    pub fn of(report: &Report) -> Self {
        StreamId::new(report.id().clone(), report.indicator())
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.indicator)
    }
}

impl FromStr for StreamId {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StoreError::Corrupt(format!("bad stream id {s:?}"));
        let (owner, indicator) = s.rsplit_once('/').ok_or_else(bad)?;
        Ok(StreamId::new(UserId::new(owner).map_err(|_| bad())?, indicator.parse().map_err(|_| bad())?))
    }
}

impl Serialize for StreamId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StreamId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered name/value pairs, serialized as a JSON object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Payload(pub Vec<(String, Value)>);

impl Payload {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_number)
    }
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Payload {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PayloadVisitor;
        impl<'de> Visitor<'de> for PayloadVisitor {
            type Value = Payload;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a payload object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Payload, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Payload(out))
            }
        }
        deserializer.deserialize_map(PayloadVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DocFlag {
    /// A meter's cumulative counter went backwards.
    CounterRegression,
}

/// One stored reading. Only the envelope is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensorDocument {
    pub stream: StreamId,
    pub tsutc: UtcTimestamp,
    pub payload: Payload,
    pub receive_time: UtcTimestamp,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<DocFlag>,
    /// Arrival order within the stream; assigned by the store.
    #[serde(default)]
    pub seq: u64,
}

impl SensorDocument {
    pub fn from_report(report: &Report, receive_time: UtcTimestamp) -> Self {
        SensorDocument {
            stream: StreamId::of(report),
            tsutc: report.tsutc(),
            payload: Payload(report.payload().iter().map(|(f, v)| (f.name().to_string(), v.clone())).collect()),
            receive_time,
            flags: Vec::new(),
            seq: 0,
        }
    }

    /// Rebuilds the report this document was stored from.
    pub fn to_report(&self) -> Result<Report, WireError> {
        let mut report = Report::new(self.stream.owner.clone(), self.tsutc, self.stream.indicator)?;
        for (name, value) in &self.payload.0 {
            let field = Field::from_name(name).ok_or_else(|| WireError::UnknownName(name.clone()))?;
            report.push(field, value.clone())?;
        }
        Ok(report)
    }

    pub fn number(&self, field: Field) -> Option<f64> {
        self.payload.number(field.name())
    }
}

pub trait SensorStore: Send + Sync {
    /// Creates a stream; creating an existing stream is a no-op.
    fn create_stream(&self, id: &StreamId) -> Result<(), StoreError>;

    fn has_stream(&self, id: &StreamId) -> bool;

    /// Appends a document and returns its position in timestamp order.
    /// The document is durable and visible to readers when this returns.
    fn append(&self, doc: SensorDocument) -> Result<usize, StoreError>;

    /// Documents with `from <= tsutc < to`, ascending; ties keep receive-time then arrival order.
    fn query_range(&self, id: &StreamId, from: UtcTimestamp, to: UtcTimestamp) -> Result<Vec<SensorDocument>, StoreError>;

    fn latest(&self, id: &StreamId) -> Result<Option<SensorDocument>, StoreError>;

    fn count(&self, id: &StreamId) -> Result<usize, StoreError>;

    fn streams(&self) -> Vec<StreamId>;
}

#[derive(Debug, Default)]
struct Stream {
    docs: Vec<SensorDocument>,
    next_seq: u64,
}

impl Stream {
    fn insert(&mut self, mut doc: SensorDocument) -> usize {
        doc.seq = self.next_seq;
        self.next_seq += 1;
        let key = (doc.tsutc, doc.receive_time);
        let at = self.docs.partition_point(|d| (d.tsutc, d.receive_time) <= key);
        self.docs.insert(at, doc);
        at
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
enum JournalEntry {
    Create { stream: StreamId },
    Append { doc: SensorDocument },
}

/// In-memory store with an optional append-only JSON-lines journal.
#[derive(Default)]
pub struct MemorySensorStore {
    streams: RwLock<HashMap<StreamId, Arc<RwLock<Stream>>>>,
    journal: Option<Mutex<BufWriter<File>>>,
}

impl MemorySensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) a journal file, replaying any existing content.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut store = MemorySensorStore::new();
        if path.exists() {
            store.import_jsonl(BufReader::new(File::open(path)?))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.journal = Some(Mutex::new(BufWriter::new(file)));
        Ok(store)
    }

    fn log(&self, entry: &JournalEntry) -> Result<(), StoreError> {
        if let Some(journal) = &self.journal {
            let mut w = journal.lock();
            serde_json::to_writer(&mut *w, entry).map_err(|e| StoreError::Storage(e.to_string()))?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    fn stream(&self, id: &StreamId) -> Result<Arc<RwLock<Stream>>, StoreError> {
        self.streams.read().get(id).cloned().ok_or_else(|| StoreError::UnknownStream(id.clone()))
    }

    /// Writes every stream and document as JSON lines.
    pub fn export_jsonl(&self, mut out: impl Write) -> Result<(), StoreError> {
        let mut ids = self.streams();
        ids.sort();
        for id in ids {
            serde_json::to_writer(&mut out, &JournalEntry::Create { stream: id.clone() }).map_err(|e| StoreError::Storage(e.to_string()))?;
            out.write_all(b"\n")?;
            let stream = self.stream(&id)?;
            let mut docs: Vec<SensorDocument> = stream.read().docs.clone();
            docs.sort_by_key(|d| d.seq);
            for doc in docs {
                serde_json::to_writer(&mut out, &JournalEntry::Append { doc }).map_err(|e| StoreError::Storage(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    /// Loads JSON lines written by [`export_jsonl`](Self::export_jsonl) or the journal.
    pub fn import_jsonl(&mut self, input: impl BufRead) -> Result<(), StoreError> {
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry =
                serde_json::from_str(&line).map_err(|e| StoreError::Corrupt(format!("line {}: {e}", n + 1)))?;
            match entry {
                JournalEntry::Create { stream } => {
                    self.streams.write().entry(stream).or_default();
                }
                JournalEntry::Append { doc } => {
                    let stream = self.stream(&doc.stream)?;
                    stream.write().insert(doc);
                }
            }
        }
        Ok(())
    }
}

impl SensorStore for MemorySensorStore {
    fn create_stream(&self, id: &StreamId) -> Result<(), StoreError> {
        let mut streams = self.streams.write();
        if !streams.contains_key(id) {
            self.log(&JournalEntry::Create { stream: id.clone() })?;
            streams.insert(id.clone(), Arc::default());
        }
        Ok(())
    }

    fn has_stream(&self, id: &StreamId) -> bool {
        self.streams.read().contains_key(id)
    }

    fn append(&self, doc: SensorDocument) -> Result<usize, StoreError> {
        let stream = self.stream(&doc.stream)?;
        let mut guard = stream.write();
        if self.journal.is_some() {
            let mut logged = doc.clone();
            logged.seq = guard.next_seq;
            self.log(&JournalEntry::Append { doc: logged })?;
        }
        Ok(guard.insert(doc))
    }

    fn query_range(&self, id: &StreamId, from: UtcTimestamp, to: UtcTimestamp) -> Result<Vec<SensorDocument>, StoreError> {
        if from > to {
            return Err(StoreError::InvalidRange { from, to });
        }
        let stream = self.stream(id)?;
        let guard = stream.read();
        let lo = guard.docs.partition_point(|d| d.tsutc < from);
        let hi = guard.docs.partition_point(|d| d.tsutc < to);
        Ok(guard.docs[lo..hi].to_vec())
    }

    fn latest(&self, id: &StreamId) -> Result<Option<SensorDocument>, StoreError> {
        Ok(self.stream(id)?.read().docs.last().cloned())
    }

    fn count(&self, id: &StreamId) -> Result<usize, StoreError> {
        Ok(self.stream(id)?.read().docs.len())
    }

    fn streams(&self) -> Vec<StreamId> {
        self.streams.read().keys().cloned().collect()
    }
}
