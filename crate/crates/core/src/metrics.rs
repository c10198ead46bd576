//! Displacement metrics and their online (dynamic) aggregation.
//!
//! Every matured prediction is one *instant*: per-candidate ADE and FDE
//! against the ground-truth future, and their minima taken independently.
//! Instant minima are averaged per agent, agent means per scene, and scene
//! means per dataset, all unweighted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::predictors::PredictionRecord;
use crate::scene_source::AgentId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("trajectory length mismatch: predicted {pred}, ground truth {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("empty trajectory")]
    Empty,
    #[error("record has no candidates")]
    NoCandidates,
    #[error("instant for agent {got} pushed into accumulator for {expected}")]
    AgentMismatch { expected: AgentId, got: AgentId },
}

fn check_lengths(pred: &[Vec2], gt: &[Vec2]) -> Result<(), MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Mean point-wise L2 distance.
pub fn ade(pred: &[Vec2], gt: &[Vec2]) -> Result<f64, MetricError> {
    check_lengths(pred, gt)?;
    let total: f64 = pred.iter().zip(gt).map(|(p, g)| p.distance(*g)).sum();
    Ok(total / pred.len() as f64)
}

/// L2 distance between the final points.
pub fn fde(pred: &[Vec2], gt: &[Vec2]) -> Result<f64, MetricError> {
    check_lengths(pred, gt)?;
    Ok(pred[pred.len() - 1].distance(gt[gt.len() - 1]))
}

/// Scores of one matured prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantError {
    pub agent_id: AgentId,
    pub issue_tick: u64,
    pub ade: Vec<f64>,
    pub fde: Vec<f64>,
    pub min_ade: f64,
    pub min_fde: f64,
    pub argmin_ade: usize,
    pub argmin_fde: usize,
}

fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
}

pub fn score_instant(record: &PredictionRecord, gt_future: &[Vec2]) -> Result<InstantError, MetricError> {
    if record.candidates.is_empty() {
        return Err(MetricError::NoCandidates);
    }
    let ades = record
        .candidates
        .iter()
        .map(|c| ade(&c.points, gt_future))
        .collect::<Result<Vec<_>, _>>()?;
    let fdes = record
        .candidates
        .iter()
        .map(|c| fde(&c.points, gt_future))
        .collect::<Result<Vec<_>, _>>()?;
    let (argmin_ade, min_ade) = argmin(&ades);
    let (argmin_fde, min_fde) = argmin(&fdes);
    Ok(InstantError {
        agent_id: record.agent_id.clone(),
        issue_tick: record.issue_tick,
        ade: ades,
        fde: fdes,
        min_ade,
        min_fde,
        argmin_ade,
        argmin_fde,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAccumulator {
    pub agent_id: AgentId,
    pub sum_min_ade: f64,
    pub sum_min_fde: f64,
    pub instant_count: u64,
}

impl AgentAccumulator {
    pub fn new(agent_id: AgentId) -> Self {
        Self {
            agent_id,
            sum_min_ade: 0.0,
            sum_min_fde: 0.0,
            instant_count: 0,
        }
    }

    pub fn accumulate(&mut self, err: &InstantError) -> Result<(), MetricError> {
        if err.agent_id != self.agent_id {
            return Err(MetricError::AgentMismatch {
                expected: self.agent_id.clone(),
                got: err.agent_id.clone(),
            });
        }
        self.sum_min_ade += err.min_ade;
        self.sum_min_fde += err.min_fde;
        self.instant_count += 1;
        Ok(())
    }

    pub fn mean_min_ade(&self) -> Option<f64> {
        (self.instant_count > 0).then(|| self.sum_min_ade / self.instant_count as f64)
    }

    pub fn mean_min_fde(&self) -> Option<f64> {
        (self.instant_count > 0).then(|| self.sum_min_fde / self.instant_count as f64)
    }
}

/// Receives every scored instant, in tick order.
pub trait MetricSink {
    fn push(&mut self, err: &InstantError);
}

impl MetricSink for Vec<InstantError> {
    fn push(&mut self, err: &InstantError) {
        Vec::push(self, err.clone());
    }
}

/// Discards instants.
pub struct NullSink;

impl MetricSink for NullSink {
    fn push(&mut self, _err: &InstantError) {}
}

/// Per-agent accumulators of one scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneAccumulator {
    agents: BTreeMap<AgentId, AgentAccumulator>,
}

impl SceneAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentAccumulator> + '_ {
        self.agents.values()
    }
}

impl MetricSink for SceneAccumulator {
    fn push(&mut self, err: &InstantError) {
        self.agents
            .entry(err.agent_id.clone())
            .or_insert_with(|| AgentAccumulator::new(err.agent_id.clone()))
            .accumulate(err)
            .expect("accumulator keyed by agent id");
    }
}

/// Operational bookkeeping of a scene run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalCounts {
    pub ticks: u64,
    pub invocations: u64,
    /// Ticks whose invocation missed the deadline.
    pub timeouts: u64,
    /// Ticks whose invocation reported a per-request failure.
    pub request_failures: u64,
    /// Predictions accepted and stored for maturity.
    pub issued: u64,
    pub matured: u64,
    /// Issued predictions whose full ground-truth horizon never exists.
    pub expired: u64,
    /// Live tracks skipped for a short or stale history, summed over ticks.
    pub ineligible: u64,
    /// Eligible agents the predictor returned nothing for, on ticks that did
    /// not time out.
    pub missing: u64,
    /// Records with fewer candidates than the requested `k`.
    pub candidate_shortfall: u64,
}

impl OperationalCounts {
    pub fn add(&mut self, other: &OperationalCounts) {
        self.ticks += other.ticks;
        self.invocations += other.invocations;
        self.timeouts += other.timeouts;
        self.request_failures += other.request_failures;
        self.issued += other.issued;
        self.matured += other.matured;
        self.expired += other.expired;
        self.ineligible += other.ineligible;
        self.missing += other.missing;
        self.candidate_shortfall += other.candidate_shortfall;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: String,
    pub min_dyn_ade: Option<f64>,
    pub min_dyn_fde: Option<f64>,
    pub agents_scored: usize,
    pub counts: OperationalCounts,
}

/// Unweighted mean over agents with at least one scored instant.
pub fn finalize_scene<'a>(
    scene_id: &str,
    accs: impl IntoIterator<Item = &'a AgentAccumulator>,
    counts: OperationalCounts,
) -> SceneMetrics {
    let means: Vec<(f64, f64)> = accs
        .into_iter()
        .filter_map(|a| Some((a.mean_min_ade()?, a.mean_min_fde()?)))
        .collect();
    let n = means.len();
    let (ade, fde) = if n == 0 {
        (None, None)
    } else {
        let sa: f64 = means.iter().map(|m| m.0).sum();
        let sf: f64 = means.iter().map(|m| m.1).sum();
        (Some(sa / n as f64), Some(sf / n as f64))
    };
    SceneMetrics {
        scene_id: scene_id.to_owned(),
        min_dyn_ade: ade,
        min_dyn_fde: fde,
        agents_scored: n,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub min_dyn_ade: Option<f64>,
    pub min_dyn_fde: Option<f64>,
    pub scenes_scored: usize,
    pub counts: OperationalCounts,
    /// Per-scene breakdown, ordered by scene id.
    pub scenes: Vec<SceneMetrics>,
}

/// Unweighted mean over scenes with a defined metric.
///
/// Scenes are ordered by id first, so the result does not depend on the order
/// scenes finished in.
pub fn aggregate_dataset(mut scenes: Vec<SceneMetrics>) -> DatasetMetrics {
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    let mean = |values: Vec<f64>| {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let ades: Vec<f64> = scenes.iter().filter_map(|s| s.min_dyn_ade).collect();
    let fdes: Vec<f64> = scenes.iter().filter_map(|s| s.min_dyn_fde).collect();
    let mut counts = OperationalCounts::default();
    for s in &scenes {
        counts.add(&s.counts);
    }
    DatasetMetrics {
        scenes_scored: ades.len(),
        min_dyn_ade: mean(ades),
        min_dyn_fde: mean(fdes),
        counts,
        scenes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; absent for fewer than two values.
    pub std: Option<f64>,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    // Shifted by the first value: identical inputs give exactly zero spread.
    let n = values.len() as f64;
    let origin = values[0];
    let mean_shift = values.iter().map(|v| v - origin).sum::<f64>() / n;
    let mean = origin + mean_shift;
    let std = (values.len() >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - origin - mean_shift).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    Some(MeanStd { mean, std })
}

/// Three decimals, or `-` for an absent metric.
pub fn format_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "-".to_owned(),
    }
}
