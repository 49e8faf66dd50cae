use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::analytics::{DailyAverage, FlowerState, TrendColor, ZoneComfortSummary};
use crate::domain::{AmbientReading, ComfortVote, UserId, UtcTimestamp, WeatherReading};
use crate::store::{GroupKey, GroupKind, Notification};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AmbientView {
    pub tsutc: UtcTimestamp,
    #[serde(flatten)]
    pub reading: AmbientReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeatherView {
    pub tsutc: UtcTimestamp,
    #[serde(flatten)]
    pub reading: WeatherReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComfortWidget {
    pub zone: String,
    pub last_vote: Option<i8>,
    pub last_vote_at: Option<UtcTimestamp>,
    pub min: i8,
    pub max: i8,
}

/// Everything the home screen shows for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HomeView {
    pub user_id: UserId,
    pub flower: Option<FlowerState>,
    pub trend_dot: Option<TrendColor>,
    pub target_wh: Option<f64>,
    pub latest_ambient: Option<AmbientView>,
    pub outdoor_weather: Option<WeatherView>,
    pub notifications: Vec<Notification>,
    pub comfort_widget: ComfortWidget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupDot {
    pub group: GroupKey,
    pub date: NaiveDate,
    pub mean_wh: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupDots {
    pub department: Option<GroupDot>,
    pub floor: Option<GroupDot>,
    pub building: Option<GroupDot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyComparisonView {
    pub user_id: UserId,
    /// Up to seven most recent dailies, oldest first.
    pub dailies: Vec<DailyAverage>,
    pub computed_average: Option<f64>,
    pub group_dots: GroupDots,
    pub target_line: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoredVote {
    pub user_id: UserId,
    pub tsutc: UtcTimestamp,
    pub vote: ComfortVote,
    pub zone_summary: Option<ZoneComfortSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GroupBy {
    User,
    Department,
    Floor,
    Building,
}

impl GroupBy {
    pub fn kind(self) -> Option<GroupKind> {
        match self {
            GroupBy::User => None,
            GroupBy::Department => Some(GroupKind::Department),
            GroupBy::Floor => Some(GroupKind::Floor),
            GroupBy::Building => Some(GroupKind::Building),
        }
    }
}

impl FromStr for GroupBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(GroupBy::User),
            "department" => Ok(GroupBy::Department),
            "floor" => Ok(GroupBy::Floor),
            "building" => Ok(GroupBy::Building),
            _ => Err(format!("unknown groupBy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    pub subject: String,
    pub total_wh: f64,
    /// Per user-day.
    pub mean_wh: f64,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeterFlag {
    pub meter_id: UserId,
    pub device: String,
    pub tsutc: UtcTimestamp,
    pub kwh: f64,
}
