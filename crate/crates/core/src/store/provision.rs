use std::path::Path;
use std::sync::Arc;

use clap::Parser;

use crate::domain::{SensorIndicator, UserId};
use crate::sumve::{MachinePowerProfile, DEFAULT_CHARGING_MULTIPLIER};

use super::{MemorySensorStore, MeterRecord, MetadataStore, SensorStore, SiteRecord, StoreError, StreamId, UserRecord};

/// The sensor store and metadata store, kept referentially consistent.
#[derive(Clone)]
pub struct Stores {
    pub sensors: Arc<dyn SensorStore>,
    pub meta: Arc<MetadataStore>,
}

impl Stores {
    pub fn new(sensors: Arc<dyn SensorStore>, meta: Arc<MetadataStore>) -> Self {
        Stores { sensors, meta }
    }

    pub fn in_memory() -> Self {
        Stores::new(Arc::new(MemorySensorStore::new()), Arc::new(MetadataStore::new()))
    }

    /// File-backed stores under `dir`: `sensors.jsonl` and `metadata.json`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        Ok(Stores::new(
            Arc::new(MemorySensorStore::open(dir.join("sensors.jsonl"))?),
            Arc::new(MetadataStore::open(dir.join("metadata.json"))?),
        ))
    }

    fn create_user_streams(&self, user: &UserId) -> Result<(), StoreError> {
        for indicator in SensorIndicator::PER_USER {
            self.sensors.create_stream(&StreamId::new(user.clone(), indicator))?;
        }
        Ok(())
    }

    /// Inserts or replaces a user; the user's streams exist when this returns.
    pub fn upsert_user(&self, record: UserRecord) -> Result<(), StoreError> {
        record.validate()?;
        self.create_user_streams(&record.user_id)?;
        self.meta.upsert_user(record)
    }

    pub fn register_site(&self, site: SiteRecord) -> Result<(), StoreError> {
        self.sensors.create_stream(&StreamId::new(site.site_id.clone(), SensorIndicator::Weather))?;
        self.meta.put_site(site)
    }

    pub fn register_meter(&self, meter: MeterRecord) -> Result<(), StoreError> {
        self.sensors.create_stream(&StreamId::new(meter.meter_id.clone(), SensorIndicator::PlugMeter))?;
        self.meta.put_meter(meter)
    }

    /// Registers a new user from provisioning arguments and returns the assigned id.
    pub fn provision_user(&self, args: &ProvisionArgs) -> Result<UserId, StoreError> {
        let record = args.to_record()?;
        record.validate()?;
        let id = record.user_id.clone();
        self.meta.insert_user(record)?;
        self.create_user_streams(&id)?;
        Ok(id)
    }

    /// The power profile and monitor flag the energy sensor needs for a user.
    pub fn sumve_config(&self, user: &UserId) -> Result<(MachinePowerProfile, bool), StoreError> {
        let record = self.meta.get_user(user)?;
        Ok((record.power_profile, record.monitor_attached()))
    }
}

/// Arguments of the `provision` command.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "provision", about = "Register a user, their office metadata and machine power profile")]
pub struct ProvisionArgs {
    /// System id; generated when omitted.
    #[arg(long)]
    pub user_id: Option<String>,
    #[arg(long)]
    pub office: String,
    #[arg(long)]
    pub department: String,
    #[arg(long)]
    pub floor: String,
    #[arg(long)]
    pub building: String,
    /// HVAC zone the office belongs to.
    #[arg(long)]
    pub zone: String,
    #[arg(long)]
    pub machine_type: String,
    #[arg(long, value_name = "W")]
    pub p_idle: f64,
    #[arg(long, value_name = "W")]
    pub p_sidle: f64,
    #[arg(long, value_name = "W")]
    pub p_sleep: f64,
    #[arg(long, value_name = "W")]
    pub p_off: f64,
    #[arg(long)]
    pub monitor_type: Option<String>,
    #[arg(long, value_name = "W", default_value_t = 0.0)]
    pub monitor_on: f64,
    #[arg(long, value_name = "W", default_value_t = 0.0)]
    pub monitor_standby: f64,
    #[arg(long, value_name = "W", default_value_t = 0.0)]
    pub monitor_off: f64,
    #[arg(long, value_name = "X", default_value_t = DEFAULT_CHARGING_MULTIPLIER)]
    pub charging_multiplier: f64,
}

impl ProvisionArgs {
    pub fn to_record(&self) -> Result<UserRecord, StoreError> {
        let user_id = match &self.user_id {
            Some(id) => UserId::new(id.as_str()).map_err(|e| StoreError::Invalid(e.to_string()))?,
            None => UserId::new(uuid::Uuid::new_v4().simple().to_string()).expect("uuid is a valid id"),
        };
        let profile = MachinePowerProfile::new(self.p_off, self.p_sleep, self.p_idle, self.p_sidle)
            .with_monitor(self.monitor_on, self.monitor_standby, self.monitor_off)
            .with_charging_multiplier(self.charging_multiplier);
        Ok(UserRecord {
            user_id,
            office_location: self.office.clone(),
            department: self.department.clone(),
            floor: self.floor.clone(),
            building: self.building.clone(),
            hvac_zone: self.zone.clone(),
            machine_type: self.machine_type.clone(),
            monitor_type: self.monitor_type.clone(),
            power_profile: profile,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &[&str] = &[
        "provision", "--user-id", "u1", "--office", "3.14", "--department", "R&D", "--floor", "3", "--building", "B1",
        "--zone", "z3", "--machine-type", "desktop", "--p-idle", "10", "--p-sidle", "30", "--p-sleep", "2", "--p-off", "1",
    ];

    #[test]
    fn full_arguments_provision_streams() {
        let stores = Stores::in_memory();
        let args = ProvisionArgs::try_parse_from(FULL).unwrap();
        let id = stores.provision_user(&args).unwrap();
        assert_eq!(id.as_str(), "u1");
        let rec = stores.meta.get_user(&id).unwrap();
        assert_eq!(rec.power_profile.p_sidle, 30.0);
        assert_eq!(rec.power_profile.charging_multiplier, DEFAULT_CHARGING_MULTIPLIER);
        for indicator in SensorIndicator::PER_USER {
            assert!(stores.sensors.has_stream(&StreamId::new(id.clone(), indicator)));
        }
        assert_eq!(stores.sumve_config(&id).unwrap(), (rec.power_profile, false));
    }

    #[test]
    fn missing_building_is_usage_error() {
        let args: Vec<&str> = FULL.iter().copied().filter(|a| *a != "--building" && *a != "B1").collect();
        let err = ProvisionArgs::try_parse_from(args).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::MissingRequiredArgument);
    }

    #[test]
    fn generated_id_and_duplicates() {
        let stores = Stores::in_memory();
        let mut args = ProvisionArgs::try_parse_from(FULL).unwrap();
        args.user_id = None;
        let id = stores.provision_user(&args).unwrap();
        assert!(!id.as_str().is_empty());
        // same office again
        assert!(matches!(stores.provision_user(&args), Err(StoreError::Duplicate(_))));
        args.office = "4.01".into();
        args.user_id = Some(id.to_string());
        assert!(matches!(stores.provision_user(&args), Err(StoreError::Duplicate(_))));
        assert_eq!(stores.meta.users().len(), 1);
    }

    #[test]
    fn invalid_profile_stores_nothing() {
        let stores = Stores::in_memory();
        let mut args = ProvisionArgs::try_parse_from(FULL).unwrap();
        args.charging_multiplier = 0.5;
        assert!(matches!(stores.provision_user(&args), Err(StoreError::Invalid(_))));
        assert!(stores.meta.users().is_empty());
        assert!(stores.sensors.streams().is_empty());
    }
}
