//! Queries and commands behind the occupant UI and the management console.

mod rogue;
mod views;

use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

use crate::analytics::{flower_score, Analytics, ZoneComfortSummary};
use crate::clock::Clock;
use crate::domain::{
    AmbientReading, ComfortVote, Field, SensorIndicator, UserId, UtcTimestamp, WeatherReading,
};
use crate::store::{
    Audience, DeliveryRecord, DocFlag, GroupKey, GroupKind, Notification, NotificationSource, SensorDocument,
    StoreError, Stores, StreamId,
};

pub use rogue::{rogue_zones, Band, RogueZoneReport, RogueZoneSettings};
pub use views::{
    AmbientView, ComfortWidget, EnergyComparisonView, GroupBy, GroupDot, GroupDots, HomeView, MeterFlag, ReportRow,
    StoredVote, WeatherView,
};

#[derive(Debug, Error)]
pub enum ConsoleError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("manager role required")]
    Forbidden,
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for ConsoleError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(s) => ConsoleError::NotFound(s),
            StoreError::UnknownGroup(g) => ConsoleError::UnknownGroup(g),
            StoreError::Invalid(s) => ConsoleError::Invalid(s),
            other => ConsoleError::Store(other),
        }
    }
}

/// Fewest other contributors a group dot needs before it is shown to a member.
pub const MIN_OTHER_MEMBERS: usize = 2;

#[derive(Clone)]
pub struct ConsoleApi {
    stores: Stores,
    analytics: Analytics,
    clock: Arc<dyn Clock>,
    pub rogue: RogueZoneSettings,
}

impl ConsoleApi {
    pub fn new(stores: Stores, clock: Arc<dyn Clock>) -> Self {
        ConsoleApi { analytics: Analytics::new(stores.clone()), stores, clock, rogue: RogueZoneSettings::default() }
    }

    pub fn with_analytics(mut self, analytics: Analytics) -> Self {
        self.analytics = analytics;
        self
    }

    fn latest(&self, owner: &UserId, indicator: SensorIndicator) -> Result<Option<SensorDocument>, ConsoleError> {
        match self.stores.sensors.latest(&StreamId::new(owner.clone(), indicator)) {
            Ok(doc) => Ok(doc),
            Err(StoreError::UnknownStream(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get_home_view(&self, user_id: &UserId) -> Result<HomeView, ConsoleError> {
        let user = self.stores.meta.get_user(user_id)?;
        let latest_ambient = self.latest(user_id, SensorIndicator::Ambient)?.and_then(|doc| {
            let reading = AmbientReading::try_from(&doc.to_report().ok()?).ok()?;
            Some(AmbientView { tsutc: doc.tsutc, reading })
        });
        let outdoor_weather = match self.stores.meta.site_for_building(&user.building) {
            Some(site) => self.latest(&site.site_id, SensorIndicator::Weather)?.and_then(|doc| {
                let reading = WeatherReading::try_from(&doc.to_report().ok()?).ok()?;
                Some(WeatherView { tsutc: doc.tsutc, reading })
            }),
            None => None,
        };
        let last_vote = self.latest(user_id, SensorIndicator::Comfort)?;
        let target = self.analytics.target_for(user_id);
        let flower = match (self.stores.meta.user_dailies(user_id).last(), target) {
            (Some(daily), Some(t)) => flower_score(daily.total_wh, t).ok(),
            _ => None,
        };
        Ok(HomeView {
            user_id: user_id.clone(),
            flower,
            trend_dot: self.stores.meta.latest_trend(user_id).map(|t| t.color),
            target_wh: target,
            latest_ambient,
            outdoor_weather,
            notifications: self.stores.meta.take_notifications(user_id)?,
            comfort_widget: ComfortWidget {
                zone: user.hvac_zone,
                last_vote: last_vote.as_ref().and_then(|d| d.number(Field::Vote)).map(|v| v as i8),
                last_vote_at: last_vote.map(|d| d.tsutc),
                min: ComfortVote::MIN,
                max: ComfortVote::MAX,
            },
        })
    }

    pub fn get_energy_comparison(&self, user_id: &UserId) -> Result<EnergyComparisonView, ConsoleError> {
        let user = self.stores.meta.get_user(user_id)?;
        let all = self.stores.meta.user_dailies(user_id);
        let dailies = all[all.len().saturating_sub(7)..].to_vec();
        let computed_average =
            (!dailies.is_empty()).then(|| dailies.iter().map(|d| d.total_wh).sum::<f64>() / dailies.len() as f64);
        let dot = |kind: GroupKind| -> Option<GroupDot> {
            let group = GroupKey::new(kind, user.group(kind));
            let daily = self.stores.meta.latest_group_daily(&group)?;
            let own = usize::from(self.stores.meta.user_daily(user_id, daily.date).is_some());
            let others = daily.members - own;
            (others == 0 || others >= MIN_OTHER_MEMBERS).then_some(GroupDot {
                group,
                date: daily.date,
                mean_wh: daily.mean_wh,
                members: daily.members,
            })
        };
        Ok(EnergyComparisonView {
            user_id: user_id.clone(),
            dailies,
            computed_average,
            group_dots: GroupDots {
                department: dot(GroupKind::Department),
                floor: dot(GroupKind::Floor),
                building: dot(GroupKind::Building),
            },
            target_line: self.analytics.target_for(user_id),
        })
    }

    /// Records a vote for the user's zone and returns the refreshed zone summary.
    pub fn submit_comfort_vote(&self, user_id: &UserId, value: f64) -> Result<StoredVote, ConsoleError> {
        let user = self.stores.meta.get_user(user_id)?;
        if value.fract() != 0.0 || !value.is_finite() {
            return Err(ConsoleError::OutOfRange(format!("vote must be an integer from -3 to 3, got {value}")));
        }
        let vote = ComfortVote::new(value as i64, user.hvac_zone.clone()).map_err(|e| ConsoleError::OutOfRange(e.to_string()))?;
        let now = self.clock.now();
        let report = vote.to_report(user_id.clone(), now).map_err(|e| ConsoleError::Invalid(e.to_string()))?;
        self.stores.sensors.append(SensorDocument::from_report(&report, now))?;
        let zone_summary = self.analytics.evaluate_zone(&user.hvac_zone, now.add_secs(1))?;
        Ok(StoredVote { user_id: user_id.clone(), tsutc: now, vote, zone_summary })
    }

    pub fn set_target(&self, user_id: &UserId, target_wh: f64) -> Result<(), ConsoleError> {
        self.stores.meta.set_target(user_id, target_wh)?;
        Ok(())
    }

    pub fn post_notification(&self, audience: Audience, text: &str, manager: bool) -> Result<DeliveryRecord, ConsoleError> {
        if !manager {
            return Err(ConsoleError::Forbidden);
        }
        Ok(self.stores.meta.post_notification(audience, text, NotificationSource::Manager, self.clock.now())?)
    }

    pub fn manager_notifications(&self, manager: bool) -> Result<Vec<Notification>, ConsoleError> {
        if !manager {
            return Err(ConsoleError::Forbidden);
        }
        Ok(self.stores.meta.manager_notifications())
    }

    pub fn comfort_summaries(&self, manager: bool) -> Result<Vec<ZoneComfortSummary>, ConsoleError> {
        if !manager {
            return Err(ConsoleError::Forbidden);
        }
        Ok(self.stores.meta.comfort_summaries())
    }

    /// Energy per subject over local dates `[from, to)`, from the stored dailies.
    pub fn manager_energy_report(
        &self,
        group_by: GroupBy,
        from: NaiveDate,
        to: NaiveDate,
        manager: bool,
    ) -> Result<Vec<ReportRow>, ConsoleError> {
        if !manager {
            return Err(ConsoleError::Forbidden);
        }
        if from > to {
            return Err(ConsoleError::Invalid(format!("period starts {from} after it ends {to}")));
        }
        let in_period = |d: &NaiveDate| *d >= from && *d < to;
        let mut rows = Vec::new();
        match group_by.kind() {
            None => {
                for user in self.stores.meta.users() {
                    let days: Vec<_> =
                        self.stores.meta.user_dailies(&user.user_id).into_iter().filter(|d| in_period(&d.date)).collect();
                    if !days.is_empty() {
                        let total: f64 = days.iter().map(|d| d.total_wh).sum();
                        rows.push(ReportRow { subject: user.user_id.to_string(), total_wh: total, mean_wh: total / days.len() as f64, days: days.len() });
                    }
                }
            }
            Some(kind) => {
                for name in self.stores.meta.group_names(kind) {
                    let key = GroupKey::new(kind, name);
                    let days: Vec<_> = self.stores.meta.group_dailies(&key).into_iter().filter(|d| in_period(&d.date)).collect();
                    if !days.is_empty() {
                        let total: f64 = days.iter().map(|d| d.total_wh).sum();
                        let member_days: usize = days.iter().map(|d| d.members).sum();
                        rows.push(ReportRow { subject: key.name, total_wh: total, mean_wh: total / member_days as f64, days: days.len() });
                    }
                }
            }
        }
        Ok(rows)
    }

    pub fn rogue_zones(&self, from: UtcTimestamp, to: UtcTimestamp) -> Result<Vec<RogueZoneReport>, ConsoleError> {
        if from > to {
            return Err(ConsoleError::Invalid(format!("period starts {from} after it ends {to}")));
        }
        Ok(rogue_zones(&self.stores, from, to, &self.rogue)?)
    }

    /// Meter readings whose cumulative counter went backwards.
    pub fn meter_flags(&self, from: UtcTimestamp, to: UtcTimestamp, manager: bool) -> Result<Vec<MeterFlag>, ConsoleError> {
        if !manager {
            return Err(ConsoleError::Forbidden);
        }
        if from > to {
            return Err(ConsoleError::Invalid(format!("period starts {from} after it ends {to}")));
        }
        let mut out = Vec::new();
        for meter in self.stores.meta.meters() {
            let stream = StreamId::new(meter.meter_id.clone(), SensorIndicator::PlugMeter);
            for doc in self.stores.sensors.query_range(&stream, from, to)? {
                if doc.flags.contains(&DocFlag::CounterRegression) {
                    out.push(MeterFlag {
                        meter_id: meter.meter_id.clone(),
                        device: meter.device.clone(),
                        tsutc: doc.tsutc,
                        kwh: doc.number(Field::Kwh).unwrap_or_default(),
                    });
                }
            }
        }
        Ok(out)
    }
}
