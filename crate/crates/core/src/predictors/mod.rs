//! Predictor contract and baseline predictors.
//!
//! A predictor receives one batch per tick (every live, currently detected
//! track with its history window) and returns up to one [`PredictionRecord`]
//! per eligible item. Records are checked against the request at the contract
//! boundary by [`validate_records`], for in-process and bridged predictors
//! alike.

mod cvm;
pub mod mock;
mod sampled;
mod select;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scene_source::{AgentId, TrackPoint};

pub use cvm::{cvm_extrapolate, Cvm};
pub use sampled::{gaussian_weights, NoisyCvm, ProbCvm, Perturbation};
pub use select::select_top_k;

/// Minimum history needed by the CVM family.
pub const CVM_MIN_HISTORY: usize = 2;

/// Probability sums must land within this of 1.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Deterministic,
    Stochastic,
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestItem {
    pub agent_id: AgentId,
    pub history: Vec<TrackPoint>,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub tick: u64,
    pub delta_t: f64,
    pub items: Vec<RequestItem>,
    pub horizon_f: usize,
    pub k: usize,
    pub deadline: Duration,
}

impl PredictionRequest {
    pub fn eligible_items(&self) -> impl Iterator<Item = &RequestItem> + '_ {
        self.items.iter().filter(|i| i.eligible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrajectory {
    /// Positions at ticks `issue + 1 ..= issue + F`.
    pub points: Vec<Vec2>,
    pub probability: Option<f64>,
}

impl CandidateTrajectory {
    pub fn new(points: Vec<Vec2>) -> Self {
        Self {
            points,
            probability: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub agent_id: AgentId,
    pub issue_tick: u64,
    pub candidates: Vec<CandidateTrajectory>,
    /// Wall-clock time of the invocation that produced this record, measured
    /// by the harness.
    pub inference_elapsed: Duration,
    pub modality: Modality,
}

/// Why an invocation produced no records.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    /// The invocation missed its deadline; the tick is counted as a timeout.
    #[error("deadline exceeded")]
    Timeout,
    /// The predictor reported a failure for this request only.
    #[error("request failed: {0}")]
    RequestFailed(String),
    /// The predictor is unusable; the scene is aborted.
    #[error("predictor failure: {0}")]
    Fatal(String),
}

pub trait Predictor: Send {
    fn name(&self) -> &str;

    fn modality(&self) -> Modality;

    fn min_history(&self) -> usize {
        CVM_MIN_HISTORY
    }

    /// Enforces `request.deadline` itself and reports [`PredictorError::Timeout`].
    ///
    /// The replay engine then calls the predictor inline in realtime mode
    /// instead of on a deadline worker.
    fn enforces_deadline(&self) -> bool {
        false
    }

    /// Called once at the start of each scene.
    fn reset(&mut self, _scene_id: &str) {}

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError>;
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn modality(&self) -> Modality {
        (**self).modality()
    }
    fn min_history(&self) -> usize {
        (**self).min_history()
    }
    fn enforces_deadline(&self) -> bool {
        (**self).enforces_deadline()
    }
    fn reset(&mut self, scene_id: &str) {
        (**self).reset(scene_id)
    }
    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        (**self).predict(request)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContractError {
    #[error("record for agent {0} which is not an eligible item of the request")]
    UnknownAgent(AgentId),
    #[error("more than one record for agent {0}")]
    DuplicateAgent(AgentId),
    #[error("record for agent {0} has no candidates")]
    NoCandidates(AgentId),
    #[error("record for agent {agent} has issue tick {got}, request tick is {expected}")]
    IssueTick { agent: AgentId, expected: u64, got: u64 },
    #[error("agent {agent} candidate {index} has {got} points, horizon is {expected}")]
    HorizonLength {
        agent: AgentId,
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("agent {agent} candidate {index} has a non-finite coordinate")]
    NonFinite { agent: AgentId, index: usize },
    #[error("deterministic record for agent {0} must have exactly one candidate")]
    DeterministicCount(AgentId),
    #[error("probabilistic record for agent {0} has candidates without probability")]
    MissingProbability(AgentId),
    #[error("agent {agent}: probabilities must lie in [0, 1] and sum to 1, got sum {sum}")]
    BadProbabilities { agent: AgentId, sum: f64 },
}

/// Checks records against the request they answer.
pub fn validate_records(
    request: &PredictionRequest,
    records: &[PredictionRecord],
) -> Result<(), ContractError> {
    let eligible: BTreeSet<&AgentId> = request.eligible_items().map(|i| &i.agent_id).collect();
    let mut seen = BTreeSet::new();
    for record in records {
        let agent = &record.agent_id;
        if !eligible.contains(agent) {
            return Err(ContractError::UnknownAgent(agent.clone()));
        }
        if !seen.insert(agent) {
            return Err(ContractError::DuplicateAgent(agent.clone()));
        }
        if record.issue_tick != request.tick {
            return Err(ContractError::IssueTick {
                agent: agent.clone(),
                expected: request.tick,
                got: record.issue_tick,
            });
        }
        if record.candidates.is_empty() {
            return Err(ContractError::NoCandidates(agent.clone()));
        }
        for (index, c) in record.candidates.iter().enumerate() {
            if c.points.len() != request.horizon_f {
                return Err(ContractError::HorizonLength {
                    agent: agent.clone(),
                    index,
                    expected: request.horizon_f,
                    got: c.points.len(),
                });
            }
            if !c.points.iter().all(|p| p.is_finite()) {
                return Err(ContractError::NonFinite {
                    agent: agent.clone(),
                    index,
                });
            }
        }
        match record.modality {
            Modality::Deterministic if record.candidates.len() != 1 => {
                return Err(ContractError::DeterministicCount(agent.clone()));
            }
            Modality::Probabilistic => {
                let probs: Option<Vec<f64>> =
                    record.candidates.iter().map(|c| c.probability).collect();
                let probs = probs.ok_or_else(|| ContractError::MissingProbability(agent.clone()))?;
                let sum: f64 = probs.iter().sum();
                let in_range = probs.iter().all(|p| (0.0..=1.0).contains(p));
                if !in_range || (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(ContractError::BadProbabilities {
                        agent: agent.clone(),
                        sum,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}
