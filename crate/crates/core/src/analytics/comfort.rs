use crate::domain::{Field, SensorIndicator, UtcTimestamp};
use crate::store::{Stores, StoreError, StreamId};

use super::{ZoneComfortSummary, SEVERITY_MEAN, SEVERITY_MIN_VOTES};

/// Aggregates votes; `None` when there are none.
pub fn summarize_votes(zone: &str, from: UtcTimestamp, to: UtcTimestamp, votes: &[i8]) -> Option<ZoneComfortSummary> {
    if votes.is_empty() {
        return None;
    }
    let mut histogram = [0u32; 7];
    for v in votes {
        histogram[(*v as i32 + 3).clamp(0, 6) as usize] += 1;
    }
    let vote_count = votes.len() as u32;
    let mean_vote = votes.iter().map(|v| *v as f64).sum::<f64>() / votes.len() as f64;
    Some(ZoneComfortSummary {
        zone: zone.to_string(),
        from,
        to,
        vote_count,
        mean_vote,
        histogram,
        severe: mean_vote.abs() >= SEVERITY_MEAN && vote_count >= SEVERITY_MIN_VOTES,
    })
}

/// Votes tagged with `zone` in `[from, to)` across all comfort streams.
pub fn comfort_zone_summary(
    stores: &Stores,
    zone: &str,
    from: UtcTimestamp,
    to: UtcTimestamp,
) -> Result<Option<ZoneComfortSummary>, StoreError> {
    let mut votes = Vec::new();
    for user in stores.meta.users() {
        let stream = StreamId::new(user.user_id, SensorIndicator::Comfort);
        for doc in stores.sensors.query_range(&stream, from, to)? {
            let in_zone = doc.payload.get(Field::Zone.name()).and_then(|v| v.as_text()) == Some(zone);
            if let (true, Some(v)) = (in_zone, doc.number(Field::Vote)) {
                votes.push(v as i8);
            }
        }
    }
    Ok(summarize_votes(zone, from, to, &votes))
}
