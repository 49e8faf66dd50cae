//! Trend indicators, daily rollups, flower scores and comfort summaries.

mod comfort;
mod engine;
mod scheduler;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{UserId, UtcTimestamp};

pub use comfort::{comfort_zone_summary, summarize_votes};
pub use engine::{default_target, same_time_days_before, Analytics, DailyRollup, FIFTEEN_MINUTES};
pub use scheduler::{run_tick, Cadence, Scheduler, TickKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TrendColor {
    Green,
    Orange,
    Red,
}

/// Ratio-based trend colour with a five percent deadband around 1.
pub fn trend_color(last_cycle_wh: f64, reference_wh: f64) -> TrendColor {
    if reference_wh <= 0.0 {
        return if last_cycle_wh <= 0.0 { TrendColor::Orange } else { TrendColor::Red };
    }
    let r = last_cycle_wh / reference_wh;
    if r < 0.95 {
        TrendColor::Green
    } else if r <= 1.05 {
        TrendColor::Orange
    } else {
        TrendColor::Red
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrendIndicator {
    pub user_id: UserId,
    pub window_end: UtcTimestamp,
    pub color: TrendColor,
    pub last_cycle_wh: f64,
    /// The value the colour was computed against; absent when there was no history.
    pub reference_wh: Option<f64>,
    pub previous_day_wh: Option<f64>,
    pub week_mean_wh: Option<f64>,
}

/// One day of energy for a user or a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DailyAverage {
    pub date: NaiveDate,
    pub total_wh: f64,
    pub mean_wh: f64,
    /// Contributing members (1 for a user).
    pub members: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FlowerState {
    Flourishing,
    Neutral,
    NeedsImprovement,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("target must be positive, got {0}")]
    NonPositiveTarget(f64),
}

pub fn flower_score(actual_wh: f64, target_wh: f64) -> Result<FlowerState, AnalyticsError> {
    if !target_wh.is_finite() || target_wh <= 0.0 {
        return Err(AnalyticsError::NonPositiveTarget(target_wh));
    }
    Ok(if actual_wh <= target_wh {
        FlowerState::Flourishing
    } else if actual_wh <= 1.10 * target_wh {
        FlowerState::Neutral
    } else {
        FlowerState::NeedsImprovement
    })
}

pub const SEVERITY_MEAN: f64 = 2.0;
pub const SEVERITY_MIN_VOTES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ZoneComfortSummary {
    pub zone: String,
    pub from: UtcTimestamp,
    pub to: UtcTimestamp,
    pub vote_count: u32,
    pub mean_vote: f64,
    /// Counts for votes -3 through +3.
    pub histogram: [u32; 7],
    pub severe: bool,
}
