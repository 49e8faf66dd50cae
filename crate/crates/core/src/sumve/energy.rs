use crate::domain::{EnergyReading, Report, UserId, UtcTimestamp, WireError};

use super::{MachinePowerProfile, PowerSample, PowerState, StateOccupancy, SumveError, TimeFractions, Window};

/// Hours in a non-leap year.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Counts 1 Hz samples per state. Samples off AC power go to the battery bucket.
pub fn accumulate(samples: &[PowerSample], window: Window) -> StateOccupancy {
    let mut occ = StateOccupancy::default();
    for sample in samples.iter().filter(|s| window.contains(s.ts)) {
        if !sample.battery.on_ac_power {
            occ.on_battery_seconds += 1;
        } else if sample.battery.charging {
            occ.add_charging(sample.state, 1);
        } else {
            occ.add(sample.state, 1);
        }
    }
    occ
}

/// Energy drawn from the building over one window.
///
/// Battery seconds contribute nothing. Monitor draw is added for every plugged
/// second when `monitor_attached`. The charging multiplier scales system draw
/// only: for the seconds recorded as charging, or for every plugged second
/// when `charging` is set.
pub fn interval_energy(occ: &StateOccupancy, profile: &MachinePowerProfile, monitor_attached: bool, charging: bool) -> EnergyReading {
    let mut joules = 0.0;
    for state in PowerState::ALL {
        let secs = occ.seconds(state) as f64;
        let charging_secs = if charging { secs } else { occ.charging_seconds(state) as f64 };
        let system = profile.system_watts(state);
        joules += system * (secs - charging_secs) + system * profile.charging_multiplier * charging_secs;
        if monitor_attached {
            joules += profile.monitor_watts(state) * secs;
        }
    }
    EnergyReading {
        interval_wh: joules / 3600.0,
        off_s: occ.seconds(PowerState::Off),
        sleep_s: occ.seconds(PowerState::Sleep),
        idle_s: occ.seconds(PowerState::Idle),
        short_idle_s: occ.seconds(PowerState::ShortIdle),
        work_s: occ.seconds(PowerState::Work),
        battery_s: occ.on_battery_seconds,
        charging_s: if charging { occ.plugged_seconds() } else { occ.total_charging_seconds() },
    }
}

/// Annual energy estimate in kWh from per-state draw and time fractions.
pub fn tec_annual(profile: &MachinePowerProfile, fractions: &TimeFractions) -> Result<f64, SumveError> {
    fractions.validate()?;
    let weighted = profile.p_off * fractions.t_off
        + profile.p_sleep * fractions.t_sleep
        + profile.p_idle * fractions.t_idle
        + profile.p_sidle * (fractions.t_sidle + fractions.t_work);
    Ok(HOURS_PER_YEAR / 1000.0 * weighted)
}

/// Builds the `energysensor` report for a window, or `None` when the whole
/// window was spent on battery.
pub fn make_energy_report(
    user: &UserId,
    ts: UtcTimestamp,
    occ: &StateOccupancy,
    profile: &MachinePowerProfile,
    monitor_attached: bool,
) -> Result<Option<Report>, WireError> {
    if occ.all_on_battery() {
        return Ok(None);
    }
    interval_energy(occ, profile, monitor_attached, false).to_report(user.clone(), ts).map(Some)
}
