use std::time::Duration;

use crate::geometry::Vec2;
use crate::scene_source::TrackPoint;

use super::{
    CandidateTrajectory, Modality, PredictionRecord, PredictionRequest, Predictor, PredictorError,
};

/// Final point and per-tick displacement from the last two history points.
///
/// With a gap between the two points the displacement is divided by the tick
/// difference, so the velocity stays in m/tick.
pub(crate) fn final_velocity(history: &[TrackPoint]) -> Option<(TrackPoint, Vec2)> {
    let [.., prev, last] = history else {
        return None;
    };
    let dt_ticks = (last.tick - prev.tick) as f64;
    let step = if dt_ticks == 1.0 {
        last.pos - prev.pos
    } else {
        (last.pos - prev.pos) * (1.0 / dt_ticks)
    };
    Some((*last, step))
}

/// Positions at ticks `issue_tick + 1 ..= issue_tick + horizon`, moving from
/// `last` with a constant per-tick displacement `step`.
pub(crate) fn extrapolate(last: TrackPoint, step: Vec2, issue_tick: u64, horizon: usize) -> Vec<Vec2> {
    (1..=horizon as u64)
        .map(|m| {
            let ahead = (issue_tick + m - last.tick) as f64;
            last.pos + step * ahead
        })
        .collect()
}

/// Constant-velocity extrapolation of a history window; `None` if the
/// window has fewer than two points.
pub fn cvm_extrapolate(history: &[TrackPoint], issue_tick: u64, horizon: usize) -> Option<Vec<Vec2>> {
    let (last, step) = final_velocity(history)?;
    Some(extrapolate(last, step, issue_tick, horizon))
}

/// Constant Velocity Model: one deterministic candidate extrapolating the
/// final observed velocity.
#[derive(Debug, Clone, Default)]
pub struct Cvm;

impl Predictor for Cvm {
    fn name(&self) -> &str {
        "cvm"
    }

    fn modality(&self) -> Modality {
        Modality::Deterministic
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        Ok(request
            .eligible_items()
            .filter_map(|item| {
                let points = cvm_extrapolate(&item.history, request.tick, request.horizon_f)?;
                Some(PredictionRecord {
                    agent_id: item.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates: vec![CandidateTrajectory::new(points)],
                    inference_elapsed: Duration::ZERO,
                    modality: Modality::Deterministic,
                })
            })
            .collect())
    }
}
