use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, SensorIndicator, UtcTimestamp};
use crate::store::{StoreError, Stores, StreamId};

/// A closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RogueZoneSettings {
    pub temp_band: Band,
    pub rh_band: Band,
    /// A zone is listed when strictly more than this fraction is out of band.
    pub threshold: f64,
}

impl Default for RogueZoneSettings {
    fn default() -> Self {
        RogueZoneSettings { temp_band: Band { min: 20.0, max: 26.0 }, rh_band: Band { min: 30.0, max: 60.0 }, threshold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RogueZoneReport {
    pub zone: String,
    pub from: UtcTimestamp,
    pub to: UtcTimestamp,
    pub readings: usize,
    pub out_of_band: usize,
    pub fraction: f64,
    pub min_temp_c: f64,
    pub max_temp_c: f64,
    pub min_rh: f64,
    pub max_rh: f64,
}

/// Zones whose ambient readings in `[from, to)` leave either band too often, worst first.
pub fn rogue_zones(
    stores: &Stores,
    from: UtcTimestamp,
    to: UtcTimestamp,
    settings: &RogueZoneSettings,
) -> Result<Vec<RogueZoneReport>, StoreError> {
    let mut by_zone: BTreeMap<String, RogueZoneReport> = BTreeMap::new();
    for user in stores.meta.users() {
        let stream = StreamId::new(user.user_id.clone(), SensorIndicator::Ambient);
        for doc in stores.sensors.query_range(&stream, from, to)? {
            let (Some(t), Some(rh)) = (doc.number(Field::TempC), doc.number(Field::Rh)) else {
                continue;
            };
            let r = by_zone.entry(user.hvac_zone.clone()).or_insert_with(|| RogueZoneReport {
                zone: user.hvac_zone.clone(),
                from,
                to,
                readings: 0,
                out_of_band: 0,
                fraction: 0.0,
                min_temp_c: f64::INFINITY,
                max_temp_c: f64::NEG_INFINITY,
                min_rh: f64::INFINITY,
                max_rh: f64::NEG_INFINITY,
            });
            r.readings += 1;
            if !settings.temp_band.contains(t) || !settings.rh_band.contains(rh) {
                r.out_of_band += 1;
            }
            r.min_temp_c = r.min_temp_c.min(t);
            r.max_temp_c = r.max_temp_c.max(t);
            r.min_rh = r.min_rh.min(rh);
            r.max_rh = r.max_rh.max(rh);
        }
    }
    let mut out: Vec<RogueZoneReport> = by_zone
        .into_values()
        .map(|mut r| {
            r.fraction = r.out_of_band as f64 / r.readings as f64;
            r
        })
        .filter(|r| r.fraction > settings.threshold)
        .collect();
    out.sort_by(|a, b| b.fraction.total_cmp(&a.fraction).then_with(|| a.zone.cmp(&b.zone)));
    Ok(out)
}
