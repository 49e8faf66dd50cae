//! Software energy sensor.
//!
//! A PC spends its time in a handful of power states whose draw is close to
//! constant, so sampling the current state once a second and multiplying the
//! accumulated occupancy by per-state watts estimates energy without a meter.
//! Work and short idle draw the same power and are billed at one rate.

mod energy;
mod events;
mod observer;
mod sensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UtcTimestamp;

pub use energy::{accumulate, interval_energy, make_energy_report, tec_annual, HOURS_PER_YEAR};
pub use events::{derive_sleep, sleep_spans, EventKind, SleepAttribution, Span, SpanKind, SystemEvent};
pub use observer::{parse_trace, ObserverError, ScriptedObserver, SimulatedObserver, SystemObserver, TraceError, TraceSegment};
pub use sensor::{sample_loop, EnergySensor, SampleOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SumveError {
    #[error("time fractions sum to {0}, expected 1")]
    FractionsDoNotSum(f64),
    #[error("time fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("invalid power profile: {0}")]
    InvalidProfile(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerState {
    Off,
    Sleep,
    /// On with the screen off.
    Idle,
    /// On with the screen on.
    #[serde(rename = "sidle")]
    ShortIdle,
    Work,
}

impl PowerState {
    pub const ALL: [PowerState; 5] =
        [PowerState::Off, PowerState::Sleep, PowerState::Idle, PowerState::ShortIdle, PowerState::Work];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn token(self) -> &'static str {
        match self {
            PowerState::Off => "off",
            PowerState::Sleep => "sleep",
            PowerState::Idle => "idle",
            PowerState::ShortIdle => "sidle",
            PowerState::Work => "work",
        }
    }
}

impl fmt::Display for PowerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PowerState {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PowerState::ALL.into_iter().find(|p| p.token().eq_ignore_ascii_case(s)).ok_or(())
    }
}

/// Per-state draw of one machine type and its monitor, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MachinePowerProfile {
    pub p_off: f64,
    pub p_sleep: f64,
    pub p_idle: f64,
    pub p_sidle: f64,
    #[serde(default)]
    pub monitor_on: f64,
    #[serde(default)]
    pub monitor_standby: f64,
    #[serde(default)]
    pub monitor_off: f64,
    #[serde(default = "default_charging_multiplier")]
    pub charging_multiplier: f64,
}

pub const DEFAULT_CHARGING_MULTIPLIER: f64 = 2.5;

fn default_charging_multiplier() -> f64 {
    DEFAULT_CHARGING_MULTIPLIER
}

impl MachinePowerProfile {
    /// A machine profile without a monitor.
    pub fn new(p_off: f64, p_sleep: f64, p_idle: f64, p_sidle: f64) -> Self {
        MachinePowerProfile {
            p_off,
            p_sleep,
            p_idle,
            p_sidle,
            monitor_on: 0.0,
            monitor_standby: 0.0,
            monitor_off: 0.0,
            charging_multiplier: DEFAULT_CHARGING_MULTIPLIER,
        }
    }

    pub fn with_monitor(mut self, on: f64, standby: f64, off: f64) -> Self {
        self.monitor_on = on;
        self.monitor_standby = standby;
        self.monitor_off = off;
        self
    }

    pub fn with_charging_multiplier(mut self, multiplier: f64) -> Self {
        self.charging_multiplier = multiplier;
        self
    }

    pub fn validate(&self) -> Result<(), SumveError> {
        let watts = [self.p_off, self.p_sleep, self.p_idle, self.p_sidle, self.monitor_on, self.monitor_standby, self.monitor_off];
        if watts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SumveError::InvalidProfile("watt values must be finite and non-negative"));
        }
        if !self.charging_multiplier.is_finite() || self.charging_multiplier < 1.0 {
            return Err(SumveError::InvalidProfile("charging multiplier must be at least 1"));
        }
        Ok(())
    }

    /// System draw in a state; work is billed at the short-idle rate.
    pub fn system_watts(&self, state: PowerState) -> f64 {
        match state {
            PowerState::Off => self.p_off,
            PowerState::Sleep => self.p_sleep,
            PowerState::Idle => self.p_idle,
            PowerState::ShortIdle | PowerState::Work => self.p_sidle,
        }
    }

    /// Monitor draw while the machine is in a state.
    pub fn monitor_watts(&self, state: PowerState) -> f64 {
        match state {
            PowerState::ShortIdle | PowerState::Work => self.monitor_on,
            PowerState::Idle => self.monitor_standby,
            PowerState::Off | PowerState::Sleep => self.monitor_off,
        }
    }
}

/// On-AC and charging status at a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BatterySnapshot {
    pub on_ac_power: bool,
    pub charging: bool,
    pub charge_pct: f64,
}

impl BatterySnapshot {
    /// Desktop, or a laptop plugged in with a full battery.
    pub const AC_FULL: BatterySnapshot = BatterySnapshot { on_ac_power: true, charging: false, charge_pct: 100.0 };

    pub fn on_battery(charge_pct: f64) -> Self {
        BatterySnapshot { on_ac_power: false, charging: false, charge_pct: charge_pct.clamp(0.0, 100.0) }
    }

    pub fn charging(charge_pct: f64) -> Self {
        BatterySnapshot { on_ac_power: true, charging: true, charge_pct: charge_pct.clamp(0.0, 100.0) }
    }
}

/// One 1 Hz observation; it stands for the second starting at `ts`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    pub ts: UtcTimestamp,
    pub state: PowerState,
    pub battery: BatterySnapshot,
}

/// Half-open interval `[start, end)` of whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: UtcTimestamp,
    pub end: UtcTimestamp,
}

impl Window {
    pub fn new(start: UtcTimestamp, end: UtcTimestamp) -> Self {
        debug_assert!(start <= end);
        Window { start, end }
    }

    pub fn len_secs(&self) -> u64 {
        self.end.secs_since(self.start).max(0) as u64
    }

    pub fn contains(&self, ts: UtcTimestamp) -> bool {
        self.start <= ts && ts < self.end
    }

    /// Seconds of `[from, to)` that fall inside the window.
    pub fn overlap_secs(&self, from: UtcTimestamp, to: UtcTimestamp) -> u64 {
        let lo = from.max(self.start);
        let hi = to.min(self.end);
        hi.secs_since(lo).max(0) as u64
    }
}

/// Seconds spent in each power state over a reporting window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateOccupancy {
    seconds: [u64; 5],
    /// Subset of `seconds` observed while on AC and charging.
    charging: [u64; 5],
    pub on_battery_seconds: u64,
}

impl StateOccupancy {
    pub fn seconds(&self, state: PowerState) -> u64 {
        self.seconds[state.index()]
    }

    pub fn charging_seconds(&self, state: PowerState) -> u64 {
        self.charging[state.index()]
    }

    pub fn add(&mut self, state: PowerState, secs: u64) {
        self.seconds[state.index()] += secs;
    }

    pub fn add_charging(&mut self, state: PowerState, secs: u64) {
        self.seconds[state.index()] += secs;
        self.charging[state.index()] += secs;
    }

    pub fn with(mut self, state: PowerState, secs: u64) -> Self {
        self.add(state, secs);
        self
    }

    /// Seconds on AC power, across all states.
    pub fn plugged_seconds(&self) -> u64 {
        self.seconds.iter().sum()
    }

    pub fn total_seconds(&self) -> u64 {
        self.plugged_seconds() + self.on_battery_seconds
    }

    pub fn total_charging_seconds(&self) -> u64 {
        self.charging.iter().sum()
    }

    /// True when every observed second was on battery.
    pub fn all_on_battery(&self) -> bool {
        self.plugged_seconds() == 0 && self.on_battery_seconds > 0
    }

    pub fn merge(&mut self, other: &StateOccupancy) {
        for i in 0..5 {
            self.seconds[i] += other.seconds[i];
            self.charging[i] += other.charging[i];
        }
        self.on_battery_seconds += other.on_battery_seconds;
    }
}

/// Fraction of a year spent in each state, as used by the annual estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimeFractions {
    pub t_off: f64,
    pub t_sleep: f64,
    pub t_idle: f64,
    pub t_sidle: f64,
    pub t_work: f64,
}

impl TimeFractions {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(t_off: f64, t_sleep: f64, t_idle: f64, t_sidle: f64, t_work: f64) -> Result<Self, SumveError> {
        let fractions = TimeFractions { t_off, t_sleep, t_idle, t_sidle, t_work };
        fractions.validate()?;
        Ok(fractions)
    }

    pub fn validate(&self) -> Result<(), SumveError> {
        let all = [self.t_off, self.t_sleep, self.t_idle, self.t_sidle, self.t_work];
        if let Some(bad) = all.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(SumveError::FractionOutOfRange(*bad));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(SumveError::FractionsDoNotSum(sum));
        }
        Ok(())
    }

    /// Fractions observed in an occupancy record (battery time excluded).
    pub fn from_occupancy(occ: &StateOccupancy) -> Option<Self> {
        let total = occ.plugged_seconds() as f64;
        if total == 0.0 {
            return None;
        }
        let f = |s| occ.seconds(s) as f64 / total;
        Some(TimeFractions {
            t_off: f(PowerState::Off),
            t_sleep: f(PowerState::Sleep),
            t_idle: f(PowerState::Idle),
            t_sidle: f(PowerState::ShortIdle),
            t_work: f(PowerState::Work),
        })
    }
}
