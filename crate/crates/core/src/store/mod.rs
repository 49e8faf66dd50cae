//! Sensor and metadata persistence plus user provisioning.

mod metadata;
mod provision;
mod sensor;

use thiserror::Error;

use crate::domain::UtcTimestamp;

pub use metadata::{
    Audience, DeliveryRecord, GroupKey, GroupKind, MeterRecord, MetadataStore, Notification, NotificationSource, SiteRecord,
    UserRecord,
};
pub use provision::{ProvisionArgs, Stores};
pub use sensor::{DocFlag, MemorySensorStore, Payload, SensorDocument, SensorStore, StreamId};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown stream {0}")]
    UnknownStream(StreamId),
    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: UtcTimestamp, to: UtcTimestamp },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    Duplicate(String),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("corrupt data: {0}")]
    Corrupt(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}
