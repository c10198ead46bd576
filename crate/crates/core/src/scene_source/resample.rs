use crate::geometry::Vec2;

use super::{AgentId, SceneError, Track, TrackPoint};

/// Sample times closer than this (relative to `delta_t`) to a grid point are
/// treated as lying on it.
const GRID_SNAP: f64 = 1e-9;

/// Linearly interpolates `(time_seconds, position)` samples onto the tick grid
/// `tick * delta_t`, covering the raw time range without extrapolating.
pub fn resample_to_grid(
    agent_id: AgentId,
    raw: &[(f64, Vec2)],
    delta_t: f64,
) -> Result<Track, SceneError> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(SceneError::InvalidDeltaT(delta_t));
    }
    if raw.len() < 2 {
        return Err(SceneError::InsufficientData(raw.len()));
    }
    if let Some(i) = (1..raw.len()).find(|&i| raw[i].0 <= raw[i - 1].0) {
        return Err(SceneError::NonIncreasingTimes(i));
    }

    let t_first = raw[0].0;
    let t_last = raw[raw.len() - 1].0;
    let first_tick = (t_first / delta_t - GRID_SNAP).ceil().max(0.0) as u64;
    let last_tick = (t_last / delta_t + GRID_SNAP).floor();
    if last_tick < first_tick as f64 {
        return Err(SceneError::InsufficientData(0));
    }
    let last_tick = last_tick as u64;

    let mut points = Vec::with_capacity((last_tick - first_tick + 1) as usize);
    let mut seg = 0;
    for tick in first_tick..=last_tick {
        let t = tick as f64 * delta_t;
        while seg + 2 < raw.len() && raw[seg + 1].0 < t - GRID_SNAP * delta_t {
            seg += 1;
        }
        let (ta, pa) = raw[seg];
        let (tb, pb) = raw[seg + 1];
        let pos = if (t - ta).abs() <= GRID_SNAP * delta_t {
            pa
        } else if (t - tb).abs() <= GRID_SNAP * delta_t {
            pb
        } else {
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            pa.lerp(pb, w)
        };
        points.push(TrackPoint::new(tick, pos));
    }
    Track::from_points(agent_id, points)
}

/// The track as `(time_seconds, position)` samples at `tick * delta_t`.
pub fn track_samples(track: &Track, delta_t: f64) -> Vec<(f64, Vec2)> {
    track
        .points()
        .iter()
        .map(|p| (p.tick as f64 * delta_t, p.pos))
        .collect()
}
