use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use tracing::warn;

use crate::domain::{Field, SensorIndicator, TimeZoneSpec, UserId, UtcTimestamp};
use crate::store::{
    Audience, GroupKey, GroupKind, NotificationSource, Stores, StoreError, StreamId, UserRecord,
};

use super::{comfort, trend_color, DailyAverage, TrendColor, TrendIndicator, ZoneComfortSummary};

pub const FIFTEEN_MINUTES: i64 = 15 * 60;

/// Results of one midnight rollup.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyRollup {
    pub date: Option<NaiveDate>,
    pub users: Vec<(UserId, DailyAverage)>,
    pub groups: Vec<(GroupKey, DailyAverage)>,
}

/// The same local wall-clock time `days` local days earlier.
pub fn same_time_days_before(tz: &TimeZoneSpec, ts: UtcTimestamp, days: u64) -> UtcTimestamp {
    let local = tz.localize(ts).naive_local();
    let earlier = local.checked_sub_days(Days::new(days)).unwrap_or(local);
    tz.resolve_local(earlier)
}

/// Mean of the most recent seven dailies before the latest one.
pub fn default_target(dailies: &[DailyAverage]) -> Option<f64> {
    let (_, before) = dailies.split_last()?;
    let recent = &before[before.len().saturating_sub(7)..];
    if recent.is_empty() {
        return None;
    }
    Some(recent.iter().map(|d| d.total_wh).sum::<f64>() / recent.len() as f64)
}

#[derive(Clone)]
pub struct Analytics {
    stores: Stores,
    /// Length of the comfort-vote window evaluated at each quarter-hour tick.
    pub comfort_window_secs: i64,
}

impl Analytics {
    pub fn new(stores: Stores) -> Self {
        Analytics { stores, comfort_window_secs: 3600 }
    }

    pub fn stores(&self) -> &Stores {
        &self.stores
    }

    /// Sum of `intervalWh` over energy documents in `[from, to)`, or `None` without documents.
    pub fn energy_in(&self, user: &UserId, from: UtcTimestamp, to: UtcTimestamp) -> Result<Option<f64>, StoreError> {
        let docs = self.stores.sensors.query_range(&StreamId::new(user.clone(), SensorIndicator::Energy), from, to)?;
        if docs.is_empty() {
            return Ok(None);
        }
        Ok(Some(docs.iter().filter_map(|d| d.number(Field::IntervalWh)).sum()))
    }

    fn trend_for(&self, user: &UserRecord, now: UtcTimestamp) -> Result<Option<TrendIndicator>, StoreError> {
        let id = &user.user_id;
        let Some(last) = self.energy_in(id, now.add_secs(-FIFTEEN_MINUTES), now)? else {
            return Ok(None);
        };
        let tz = self.stores.meta.timezone_for(user);
        let window_days_before = |d: u64| {
            let end = same_time_days_before(&tz, now, d);
            self.energy_in(id, end.add_secs(-FIFTEEN_MINUTES), end)
        };
        let previous_day = window_days_before(1)?;
        let mut week = Vec::new();
        for d in 1..=7 {
            if let Some(wh) = window_days_before(d)? {
                week.push(wh);
            }
        }
        let week_mean = (!week.is_empty()).then(|| week.iter().sum::<f64>() / week.len() as f64);
        let reference = previous_day.or(week_mean);
        Ok(Some(TrendIndicator {
            user_id: id.clone(),
            window_end: now,
            color: reference.map_or(TrendColor::Orange, |r| trend_color(last, r)),
            last_cycle_wh: last,
            reference_wh: reference,
            previous_day_wh: previous_day,
            week_mean_wh: week_mean,
        }))
    }

    /// Computes and stores a trend indicator for every user with energy data in `[now - 15 min, now)`.
    pub fn fifteen_minute_tick(&self, now: UtcTimestamp) -> Result<Vec<TrendIndicator>, StoreError> {
        let mut out = Vec::new();
        for user in self.stores.meta.users() {
            if let Some(t) = self.trend_for(&user, now)? {
                out.push(t);
            }
        }
        self.stores.meta.put_trends(out.clone())?;
        Ok(out)
    }

    /// Daily totals for `date` (each user's local day) and the group means derived from them.
    pub fn midnight_tick(&self, date: NaiveDate) -> Result<DailyRollup, StoreError> {
        let users = self.stores.meta.users();
        let mut per_user: BTreeMap<UserId, DailyAverage> = BTreeMap::new();
        for user in &users {
            let tz = self.stores.meta.timezone_for(user);
            let next = date.succ_opt().unwrap_or(date);
            if let Some(total) = self.energy_in(&user.user_id, tz.start_of_day(date), tz.start_of_day(next))? {
                per_user.insert(user.user_id.clone(), DailyAverage { date, total_wh: total, mean_wh: total, members: 1 });
            }
        }

        let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
        for user in &users {
            if let Some(daily) = per_user.get(&user.user_id) {
                for kind in GroupKind::ALL {
                    groups.entry(GroupKey::new(kind, user.group(kind))).or_default().push(daily.total_wh);
                }
            }
        }
        let groups: Vec<(GroupKey, DailyAverage)> = groups
            .into_iter()
            .map(|(key, values)| {
                let total: f64 = values.iter().sum();
                let n = values.len();
                (key, DailyAverage { date, total_wh: total, mean_wh: total / n as f64, members: n })
            })
            .collect();
        let users: Vec<(UserId, DailyAverage)> = per_user.into_iter().collect();
        self.stores.meta.put_dailies(date, users.clone(), groups.clone())?;
        Ok(DailyRollup { date: Some(date), users, groups })
    }

    /// Summarizes votes of the trailing comfort window for every zone.
    pub fn comfort_tick(&self, now: UtcTimestamp) -> Result<Vec<ZoneComfortSummary>, StoreError> {
        let mut zones: Vec<String> = self.stores.meta.users().into_iter().map(|u| u.hvac_zone).collect();
        zones.sort();
        zones.dedup();
        let mut out = Vec::new();
        for zone in zones {
            if let Some(summary) = self.evaluate_zone(&zone, now)? {
                out.push(summary);
            }
        }
        Ok(out)
    }

    /// Summarizes one zone's trailing window, stores the summary and notifies
    /// managers about a severe zone at most once per window length.
    pub fn evaluate_zone(&self, zone: &str, now: UtcTimestamp) -> Result<Option<ZoneComfortSummary>, StoreError> {
        let from = now.add_secs(-self.comfort_window_secs);
        let Some(summary) = comfort::comfort_zone_summary(&self.stores, zone, from, now)? else {
            return Ok(None);
        };
        if summary.severe {
            let already = self.stores.meta.comfort_summaries().iter().any(|s| s.zone == zone && s.severe && s.to > from);
            if !already {
                self.notify_managers(&summary, now)?;
            }
        }
        self.stores.meta.put_comfort_summary(summary.clone())?;
        Ok(Some(summary))
    }

    pub(super) fn notify_managers(&self, summary: &ZoneComfortSummary, now: UtcTimestamp) -> Result<(), StoreError> {
        let feel = if summary.mean_vote > 0.0 { "too hot" } else { "too cold" };
        let text = format!(
            "Zone {} reports {feel}: mean vote {:.2} over {} votes",
            summary.zone, summary.mean_vote, summary.vote_count
        );
        self.stores.meta.post_notification(Audience::Managers, &text, NotificationSource::System, now)?;
        Ok(())
    }

    /// Explicit target, else the trailing seven-day mean of the user's dailies.
    pub fn target_for(&self, user: &UserId) -> Option<f64> {
        self.stores.meta.target(user).or_else(|| default_target(&self.stores.meta.user_dailies(user)))
    }

    pub(super) fn log_failure(&self, what: &str, err: &StoreError) {
        warn!(%err, "{what} failed");
    }
}
