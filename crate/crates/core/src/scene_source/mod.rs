//! Scene ingestion, resampling, density filtering, synthetic generation and
//! the simulated observation model.

mod io;
mod observe;
mod resample;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

pub use io::{
    load_trajectory_log, parse_eth_ucy, parse_scene_jsonl, write_scene_jsonl, EthUcyOptions,
    LogFormat,
};
pub use observe::observe;
pub use resample::{resample_to_grid, track_samples};
pub use synthetic::{generate_dataset, generate_synthetic_scene, WalkerConfig};

/// Opaque agent identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub tick: u64,
    pub pos: Vec2,
}

impl TrackPoint {
    pub fn new(tick: u64, pos: Vec2) -> Self {
        Self { tick, pos }
    }
}

/// A sequence of positions for one agent with strictly increasing ticks.
///
/// Ground-truth tracks built through [`Track::contiguous`] have no gaps, which
/// lets [`Track::position_at`] index directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub agent_id: AgentId,
    points: Vec<TrackPoint>,
}

impl Track {
    /// Gap-free track starting at `start_tick`.
    pub fn contiguous(
        agent_id: AgentId,
        start_tick: u64,
        positions: impl IntoIterator<Item = Vec2>,
    ) -> Result<Self, SceneError> {
        let points = positions
            .into_iter()
            .enumerate()
            .map(|(i, pos)| TrackPoint::new(start_tick + i as u64, pos))
            .collect();
        Self::from_points(agent_id, points)
    }

    /// Track from explicit points; ticks must strictly increase, gaps allowed.
    pub fn from_points(agent_id: AgentId, points: Vec<TrackPoint>) -> Result<Self, SceneError> {
        if points.is_empty() {
            return Err(SceneError::EmptyTrack(agent_id));
        }
        for pair in points.windows(2) {
            if pair[1].tick <= pair[0].tick {
                return Err(SceneError::NonIncreasingTicks {
                    agent: agent_id,
                    tick: pair[1].tick,
                });
            }
        }
        if let Some(p) = points.iter().find(|p| !p.pos.is_finite()) {
            return Err(SceneError::NonFinite {
                agent: agent_id,
                tick: p.tick,
            });
        }
        Ok(Self { agent_id, points })
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_tick(&self) -> u64 {
        self.points[0].tick
    }

    pub fn end_tick(&self) -> u64 {
        self.points[self.points.len() - 1].tick
    }

    pub fn is_contiguous(&self) -> bool {
        (self.end_tick() - self.start_tick()) as usize + 1 == self.points.len()
    }

    pub fn alive_at(&self, tick: u64) -> bool {
        tick >= self.start_tick() && tick <= self.end_tick()
    }

    /// Position at `tick`, or `None` outside the track's lifetime.
    pub fn position_at(&self, tick: u64) -> Option<Vec2> {
        if !self.alive_at(tick) {
            return None;
        }
        if self.is_contiguous() {
            return Some(self.points[(tick - self.start_tick()) as usize].pos);
        }
        self.points
            .binary_search_by_key(&tick, |p| p.tick)
            .ok()
            .map(|i| self.points[i].pos)
    }

    /// The `count` positions strictly after `tick`, if all of them exist.
    pub fn future_after(&self, tick: u64, count: usize) -> Option<Vec<Vec2>> {
        (1..=count as u64)
            .map(|m| self.position_at(tick + m))
            .collect()
    }

    /// Splits at gaps into contiguous tracks; segments after the first are
    /// named `<id>#<n>`.
    pub fn split_contiguous(&self) -> Vec<Track> {
        let mut out: Vec<Track> = Vec::new();
        for p in &self.points {
            match out.last_mut() {
                Some(seg) if seg.end_tick() + 1 == p.tick => seg.points.push(*p),
                _ => {
                    let agent_id = if out.is_empty() {
                        self.agent_id.clone()
                    } else {
                        AgentId(format!("{}#{}", self.agent_id, out.len()))
                    };
                    out.push(Track {
                        agent_id,
                        points: vec![*p],
                    });
                }
            }
        }
        out
    }

    /// Fills interior gaps by linear interpolation between neighbouring points.
    pub fn fill_gaps(&self) -> Track {
        let mut points = Vec::with_capacity(self.points.len());
        for pair in self.points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            points.push(a);
            let span = (b.tick - a.tick) as f64;
            for t in a.tick + 1..b.tick {
                let w = (t - a.tick) as f64 / span;
                points.push(TrackPoint::new(t, a.pos.lerp(b.pos, w)));
            }
        }
        points.push(self.points[self.points.len() - 1]);
        Track {
            agent_id: self.agent_id.clone(),
            points,
        }
    }
}

/// A continuous recording: ground-truth tracks on a uniform tick grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub delta_t: f64,
    /// Number of ticks in the scene; every track lies in `0..duration_ticks`.
    pub duration_ticks: u64,
    agents: Vec<Track>,
}

impl Scene {
    /// Builds a scene, checking id uniqueness and that ground truth is gap free.
    ///
    /// `duration_ticks` defaults to one past the last tick of any track.
    pub fn new(
        scene_id: impl Into<String>,
        delta_t: f64,
        agents: Vec<Track>,
        duration_ticks: Option<u64>,
    ) -> Result<Self, SceneError> {
        let scene_id = scene_id.into();
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(SceneError::InvalidDeltaT(delta_t));
        }
        let mut seen = BTreeSet::new();
        for track in &agents {
            if !seen.insert(track.agent_id.clone()) {
                return Err(SceneError::DuplicateAgent(track.agent_id.clone()));
            }
            if !track.is_contiguous() {
                return Err(SceneError::GroundTruthGap(track.agent_id.clone()));
            }
        }
        let span = agents.iter().map(|t| t.end_tick() + 1).max().unwrap_or(0);
        let duration_ticks = match duration_ticks {
            Some(d) if d < span => {
                return Err(SceneError::TrackOutsideScene {
                    scene: scene_id,
                    duration: d,
                })
            }
            Some(d) => d,
            None => span,
        };
        Ok(Self {
            scene_id,
            delta_t,
            duration_ticks,
            agents,
        })
    }

    pub fn agents(&self) -> &[Track] {
        &self.agents
    }

    pub fn agent(&self, id: &AgentId) -> Option<&Track> {
        self.agents.iter().find(|t| &t.agent_id == id)
    }

    /// Number of agents alive at each tick in `0..duration_ticks`.
    pub fn alive_counts(&self) -> Vec<usize> {
        let n = self.duration_ticks as usize;
        let mut delta = vec![0i64; n + 1];
        for track in &self.agents {
            delta[track.start_tick() as usize] += 1;
            delta[track.end_tick() as usize + 1] -= 1;
        }
        let mut alive = 0i64;
        delta[..n]
            .iter()
            .map(|d| {
                alive += d;
                alive as usize
            })
            .collect()
    }

    /// Largest number of agents simultaneously alive at any tick.
    pub fn max_concurrency(&self) -> usize {
        self.alive_counts().into_iter().max().unwrap_or(0)
    }
}

/// Keeps scenes that have at least one tick with `min_concurrent` or more
/// agents alive at once (inclusive boundary).
pub fn filter_scenes(scenes: Vec<Scene>, min_concurrent: usize) -> Vec<Scene> {
    let min_concurrent = min_concurrent.max(1);
    scenes
        .into_iter()
        .filter(|s| s.max_concurrency() >= min_concurrent)
        .collect()
}

/// Per-tick detector output delivered to the tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedFrame {
    pub tick: u64,
    pub detections: Vec<(AgentId, Vec2)>,
}

/// Simulated upstream perception: isotropic Gaussian noise, random misses and a
/// finite sensor radius around a static ego position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub noise_sigma: f64,
    pub dropout_prob: f64,
    pub sensor_range: f64,
    pub ego: Vec2,
    pub seed: u64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self::perfect()
    }
}

impl ObservationModel {
    /// Noise-free, loss-free, unlimited range.
    pub fn perfect() -> Self {
        Self {
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            sensor_range: f64::INFINITY,
            ego: Vec2::ZERO,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SceneError::InvalidObservation(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(SceneError::InvalidObservation(format!(
                "dropout_prob must be in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        if self.sensor_range.is_nan() || self.sensor_range <= 0.0 {
            return Err(SceneError::InvalidObservation(format!(
                "sensor_range must be > 0, got {}",
                self.sensor_range
            )));
        }
        if !self.ego.is_finite() {
            return Err(SceneError::InvalidObservation("ego must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: dataset is empty")]
    EmptyDataset(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("resampling needs at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("sample times must be strictly increasing (index {0})")]
    NonIncreasingTimes(usize),
    #[error("track for agent {0} has no points")]
    EmptyTrack(AgentId),
    #[error("track for agent {agent} has non-increasing tick {tick}")]
    NonIncreasingTicks { agent: AgentId, tick: u64 },
    #[error("track for agent {agent} has a non-finite position at tick {tick}")]
    NonFinite { agent: AgentId, tick: u64 },
    #[error("ground-truth track for agent {0} has gaps")]
    GroundTruthGap(AgentId),
    #[error("duplicate agent id {0}")]
    DuplicateAgent(AgentId),
    #[error("scene {scene}: a track extends past duration {duration}")]
    TrackOutsideScene { scene: String, duration: u64 },
    #[error("delta_t must be positive and finite, got {0}")]
    InvalidDeltaT(f64),
    #[error("invalid observation model: {0}")]
    InvalidObservation(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}
