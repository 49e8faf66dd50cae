//! Relational-style metadata: users, sites, meters, targets and derived values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use parking_lot::RwLock;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytics::{DailyAverage, TrendIndicator, ZoneComfortSummary};
use crate::domain::{TimeZoneSpec, UserId, UtcTimestamp};
use crate::sumve::MachinePowerProfile;

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserRecord {
    pub user_id: UserId,
    pub office_location: String,
    pub department: String,
    pub floor: String,
    pub building: String,
    pub hvac_zone: String,
    pub machine_type: String,
    #[serde(default)]
    pub monitor_type: Option<String>,
    pub power_profile: MachinePowerProfile,
}

impl UserRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        for (name, value) in [
            ("officeLocation", &self.office_location),
            ("department", &self.department),
            ("floor", &self.floor),
            ("building", &self.building),
            ("hvacZone", &self.hvac_zone),
            ("machineType", &self.machine_type),
        ] {
            if value.trim().is_empty() {
                return Err(StoreError::Invalid(format!("{name} must not be empty")));
            }
        }
        self.power_profile.validate().map_err(|e| StoreError::Invalid(e.to_string()))
    }

    pub fn monitor_attached(&self) -> bool {
        self.monitor_type.is_some()
    }

    pub fn group(&self, kind: GroupKind) -> &str {
        match kind {
            GroupKind::Department => &self.department,
            GroupKind::Floor => &self.floor,
            GroupKind::Building => &self.building,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GroupKind {
    Department,
    Floor,
    Building,
}

impl GroupKind {
    pub const ALL: [GroupKind; 3] = [GroupKind::Department, GroupKind::Floor, GroupKind::Building];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKind::Department => "department",
            GroupKind::Floor => "floor",
            GroupKind::Building => "building",
        }
    }
}

impl FromStr for GroupKind {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StoreError::Invalid(format!("unknown group kind {s:?}")))
    }
}

/// A group membership such as `department:R&D`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub kind: GroupKind,
    pub name: String,
}

impl GroupKey {
    pub fn new(kind: GroupKind, name: impl Into<String>) -> Self {
        GroupKey { kind, name: name.into() }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.name)
    }
}

impl FromStr for GroupKey {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, name) = s.split_once(':').ok_or_else(|| StoreError::Invalid(format!("bad group key {s:?}")))?;
        Ok(GroupKey::new(kind.parse()?, name))
    }
}

impl Serialize for GroupKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A building: its time zone and the id of its weather stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiteRecord {
    pub site_id: UserId,
    pub building: String,
    pub timezone: TimeZoneSpec,
    /// Location string handed to the weather provider.
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeterRecord {
    pub meter_id: UserId,
    /// What the meter is plugged into, e.g. a printer.
    pub device: String,
    #[serde(default)]
    pub building: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Audience {
    User { user_id: UserId },
    Group { group: GroupKey },
    All,
    Managers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NotificationSource {
    Manager,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Notification {
    pub id: u64,
    pub audience: Audience,
    pub text: String,
    pub created_at: UtcTimestamp,
    pub source: NotificationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeliveryRecord {
    pub notification: Notification,
    pub recipients: Vec<UserId>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
struct MetaState {
    users: BTreeMap<UserId, UserRecord>,
    sites: BTreeMap<UserId, SiteRecord>,
    meters: BTreeMap<UserId, MeterRecord>,
    targets: BTreeMap<UserId, f64>,
    trends: BTreeMap<UserId, Vec<TrendIndicator>>,
    user_dailies: BTreeMap<UserId, BTreeMap<NaiveDate, DailyAverage>>,
    group_dailies: BTreeMap<GroupKey, BTreeMap<NaiveDate, DailyAverage>>,
    notifications: Vec<Notification>,
    inbox: BTreeMap<UserId, Vec<u64>>,
    delivered: BTreeMap<UserId, Vec<u64>>,
    manager_inbox: Vec<u64>,
    comfort_summaries: Vec<ZoneComfortSummary>,
    next_notification_id: u64,
}

impl MetaState {
    fn notification(&self, id: u64) -> Option<&Notification> {
        self.notifications.iter().find(|n| n.id == id)
    }
}

/// Concurrent readers, serialized writers. With a backing file every write
/// is saved before the lock is released.
#[derive(Debug, Default)]
pub struct MetadataStore {
    state: RwLock<MetaState>,
    path: Option<PathBuf>,
}

impl MetadataStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let state = if path.exists() {
            serde_json::from_reader(fs::File::open(&path)?).map_err(|e| StoreError::Corrupt(e.to_string()))?
        } else {
            MetaState::default()
        };
        Ok(MetadataStore { state: RwLock::new(state), path: Some(path) })
    }

    fn write<T>(&self, f: impl FnOnce(&mut MetaState) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut state = self.state.write();
        let mut next = state.clone();
        let out = f(&mut next)?;
        if let Some(path) = &self.path {
            let tmp = path.with_extension("tmp");
            let text = serde_json::to_vec_pretty(&next).map_err(|e| StoreError::Storage(e.to_string()))?;
            fs::write(&tmp, text)?;
            fs::rename(&tmp, path)?;
        }
        *state = next;
        Ok(out)
    }

    pub fn export_json(&self, out: impl Write) -> Result<(), StoreError> {
        serde_json::to_writer_pretty(out, &*self.state.read()).map_err(|e| StoreError::Storage(e.to_string()))
    }

    pub fn import_json(&self, input: impl Read) -> Result<(), StoreError> {
        let loaded: MetaState = serde_json::from_reader(input).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        self.write(|s| {
            *s = loaded;
            Ok(())
        })
    }

    pub fn upsert_user(&self, record: UserRecord) -> Result<(), StoreError> {
        record.validate()?;
        self.write(|s| {
            s.users.insert(record.user_id.clone(), record);
            Ok(())
        })
    }

    /// Inserts a new user, failing if the id or the office is already taken.
    pub fn insert_user(&self, record: UserRecord) -> Result<(), StoreError> {
        record.validate()?;
        self.write(|s| {
            if s.users.contains_key(&record.user_id) {
                return Err(StoreError::Duplicate(format!("user {}", record.user_id)));
            }
            if s.users.values().any(|u| u.office_location == record.office_location && u.building == record.building) {
                return Err(StoreError::Duplicate(format!("office {} in {}", record.office_location, record.building)));
            }
            s.users.insert(record.user_id.clone(), record);
            Ok(())
        })
    }

    pub fn get_user(&self, id: &UserId) -> Result<UserRecord, StoreError> {
        self.state.read().users.get(id).cloned().ok_or_else(|| StoreError::NotFound(format!("user {id}")))
    }

    pub fn has_user(&self, id: &UserId) -> bool {
        self.state.read().users.contains_key(id)
    }

    pub fn users(&self) -> Vec<UserRecord> {
        self.state.read().users.values().cloned().collect()
    }

    pub fn group_members(&self, kind: GroupKind, name: &str) -> Vec<UserId> {
        self.state.read().users.values().filter(|u| u.group(kind) == name).map(|u| u.user_id.clone()).collect()
    }

    pub fn group_names(&self, kind: GroupKind) -> Vec<String> {
        let names: BTreeSet<String> = self.state.read().users.values().map(|u| u.group(kind).to_string()).collect();
        names.into_iter().collect()
    }

    pub fn put_site(&self, site: SiteRecord) -> Result<(), StoreError> {
        if site.building.trim().is_empty() {
            return Err(StoreError::Invalid("building must not be empty".into()));
        }
        self.write(|s| {
            s.sites.insert(site.site_id.clone(), site);
            Ok(())
        })
    }

    pub fn sites(&self) -> Vec<SiteRecord> {
        self.state.read().sites.values().cloned().collect()
    }

    pub fn site_for_building(&self, building: &str) -> Option<SiteRecord> {
        self.state.read().sites.values().find(|s| s.building == building).cloned()
    }

    pub fn is_site(&self, id: &UserId) -> bool {
        self.state.read().sites.contains_key(id)
    }

    /// The time zone of the user's building; UTC when the building has no site record.
    pub fn timezone_for(&self, user: &UserRecord) -> TimeZoneSpec {
        self.site_for_building(&user.building).map(|s| s.timezone).unwrap_or_else(TimeZoneSpec::utc)
    }

    pub fn put_meter(&self, meter: MeterRecord) -> Result<(), StoreError> {
        self.write(|s| {
            s.meters.insert(meter.meter_id.clone(), meter);
            Ok(())
        })
    }

    pub fn get_meter(&self, id: &UserId) -> Option<MeterRecord> {
        self.state.read().meters.get(id).cloned()
    }

    pub fn meters(&self) -> Vec<MeterRecord> {
        self.state.read().meters.values().cloned().collect()
    }

    pub fn set_target(&self, user: &UserId, target_wh: f64) -> Result<(), StoreError> {
        if !(target_wh > 0.0 && target_wh.is_finite()) {
            return Err(StoreError::Invalid(format!("target must be positive, got {target_wh}")));
        }
        self.write(|s| {
            if !s.users.contains_key(user) {
                return Err(StoreError::NotFound(format!("user {user}")));
            }
            s.targets.insert(user.clone(), target_wh);
            Ok(())
        })
    }

    pub fn target(&self, user: &UserId) -> Option<f64> {
        self.state.read().targets.get(user).copied()
    }

    /// Stores indicators; an indicator for an existing (user, windowEnd) replaces it.
    pub fn put_trends(&self, trends: Vec<TrendIndicator>) -> Result<(), StoreError> {
        if trends.is_empty() {
            return Ok(());
        }
        self.write(|s| {
            for t in trends {
                let list = s.trends.entry(t.user_id.clone()).or_default();
                let at = list.partition_point(|x| x.window_end < t.window_end);
                if list.get(at).is_some_and(|x| x.window_end == t.window_end) {
                    list[at] = t;
                } else {
                    list.insert(at, t);
                }
            }
            Ok(())
        })
    }

    pub fn latest_trend(&self, user: &UserId) -> Option<TrendIndicator> {
        self.state.read().trends.get(user).and_then(|l| l.last().cloned())
    }

    pub fn trends(&self, user: &UserId) -> Vec<TrendIndicator> {
        self.state.read().trends.get(user).cloned().unwrap_or_default()
    }

    pub fn trend_at(&self, user: &UserId, window_end: UtcTimestamp) -> Option<TrendIndicator> {
        self.state.read().trends.get(user)?.iter().find(|t| t.window_end == window_end).cloned()
    }

    /// Replaces all dailies for `date` in one write.
    pub fn put_dailies(
        &self,
        date: NaiveDate,
        users: Vec<(UserId, DailyAverage)>,
        groups: Vec<(GroupKey, DailyAverage)>,
    ) -> Result<(), StoreError> {
        self.write(|s| {
            for per_date in s.user_dailies.values_mut() {
                per_date.remove(&date);
            }
            for per_date in s.group_dailies.values_mut() {
                per_date.remove(&date);
            }
            for (user, daily) in users {
                s.user_dailies.entry(user).or_default().insert(date, daily);
            }
            for (group, daily) in groups {
                s.group_dailies.entry(group).or_default().insert(date, daily);
            }
            Ok(())
        })
    }

    /// A user's dailies in ascending date order.
    pub fn user_dailies(&self, user: &UserId) -> Vec<DailyAverage> {
        self.state.read().user_dailies.get(user).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    pub fn user_daily(&self, user: &UserId, date: NaiveDate) -> Option<DailyAverage> {
        self.state.read().user_dailies.get(user)?.get(&date).cloned()
    }

    pub fn group_dailies(&self, group: &GroupKey) -> Vec<DailyAverage> {
        self.state.read().group_dailies.get(group).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    pub fn group_daily(&self, group: &GroupKey, date: NaiveDate) -> Option<DailyAverage> {
        self.state.read().group_dailies.get(group)?.get(&date).cloned()
    }

    pub fn latest_group_daily(&self, group: &GroupKey) -> Option<DailyAverage> {
        self.state.read().group_dailies.get(group)?.values().next_back().cloned()
    }

    /// Resolves the audience and queues the notification for each recipient.
    pub fn post_notification(
        &self,
        audience: Audience,
        text: &str,
        source: NotificationSource,
        now: UtcTimestamp,
    ) -> Result<DeliveryRecord, StoreError> {
        if text.trim().is_empty() {
            return Err(StoreError::Invalid("notification text must not be empty".into()));
        }
        self.write(|s| {
            let recipients: Vec<UserId> = match &audience {
                Audience::User { user_id } => {
                    if !s.users.contains_key(user_id) {
                        return Err(StoreError::NotFound(format!("user {user_id}")));
                    }
                    vec![user_id.clone()]
                }
                Audience::Group { group } => {
                    let members: Vec<UserId> =
                        s.users.values().filter(|u| u.group(group.kind) == group.name).map(|u| u.user_id.clone()).collect();
                    if members.is_empty() {
                        return Err(StoreError::UnknownGroup(group.to_string()));
                    }
                    members
                }
                Audience::All => s.users.keys().cloned().collect(),
                Audience::Managers => Vec::new(),
            };
            s.next_notification_id += 1;
            let notification =
                Notification { id: s.next_notification_id, audience, text: text.to_string(), created_at: now, source };
            for r in &recipients {
                s.inbox.entry(r.clone()).or_default().push(notification.id);
            }
            if notification.audience == Audience::Managers {
                s.manager_inbox.push(notification.id);
            }
            s.notifications.push(notification.clone());
            Ok(DeliveryRecord { notification, recipients })
        })
    }

    /// Removes and returns the user's undelivered notifications, archiving them.
    pub fn take_notifications(&self, user: &UserId) -> Result<Vec<Notification>, StoreError> {
        if self.state.read().inbox.get(user).is_none_or(Vec::is_empty) {
            return Ok(Vec::new());
        }
        self.write(|s| {
            let ids = s.inbox.remove(user).unwrap_or_default();
            let out = ids.iter().filter_map(|id| s.notification(*id).cloned()).collect();
            s.delivered.entry(user.clone()).or_default().extend(ids);
            Ok(out)
        })
    }

    pub fn delivered_notifications(&self, user: &UserId) -> Vec<Notification> {
        let s = self.state.read();
        s.delivered.get(user).map(|ids| ids.iter().filter_map(|id| s.notification(*id).cloned()).collect()).unwrap_or_default()
    }

    pub fn manager_notifications(&self) -> Vec<Notification> {
        let s = self.state.read();
        s.manager_inbox.iter().filter_map(|id| s.notification(*id).cloned()).collect()
    }

    pub fn put_comfort_summary(&self, summary: ZoneComfortSummary) -> Result<(), StoreError> {
        self.write(|s| {
            s.comfort_summaries.retain(|x| !(x.zone == summary.zone && x.from == summary.from && x.to == summary.to));
            s.comfort_summaries.push(summary);
            Ok(())
        })
    }

    pub fn comfort_summaries(&self) -> Vec<ZoneComfortSummary> {
        self.state.read().comfort_summaries.clone()
    }
}
