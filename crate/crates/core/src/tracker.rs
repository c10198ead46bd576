//! Exponential-moving-average tracker.
//!
//! Detections arrive with their true agent ids, so association is given. Each
//! live track keeps a bounded ring of smoothed points which the replay engine
//! slices into history windows for the predictors.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scene_source::{AgentId, ObservedFrame, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Weight of the new detection, in `(0, 1]`.
    pub alpha: f64,
    /// Consecutive missed ticks tolerated before a track is dropped.
    pub max_missed: u32,
    /// Retained history length, at least 2.
    pub h_max: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            max_missed: 2,
            h_max: 20,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(TrackerError::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.h_max < 2 {
            return Err(TrackerError::InvalidConfig(format!(
                "h_max must be >= 2, got {}",
                self.h_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub agent_id: AgentId,
    pub smoothed_pos: Vec2,
    history: VecDeque<TrackPoint>,
    pub ticks_since_seen: u32,
    pub alive: bool,
}

impl TrackState {
    fn born(agent_id: AgentId, tick: u64, z: Vec2) -> Self {
        let mut history = VecDeque::new();
        history.push_back(TrackPoint::new(tick, z));
        Self {
            agent_id,
            smoothed_pos: z,
            history,
            ticks_since_seen: 0,
            alive: true,
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &TrackPoint> + '_ {
        self.history.iter()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn last_tick(&self) -> u64 {
        self.history.back().map(|p| p.tick).unwrap_or(0)
    }

    /// The last `min(h, available)` smoothed points, oldest first.
    pub fn history_window(&self, h: usize) -> Result<Vec<TrackPoint>, TrackerError> {
        if !self.alive {
            return Err(TrackerError::NoTrack(self.agent_id.clone()));
        }
        if h == 0 {
            return Err(TrackerError::InvalidWindow(h));
        }
        let skip = self.history.len().saturating_sub(h);
        Ok(self.history.iter().skip(skip).copied().collect())
    }
}

/// Whether a history window is long enough for a predictor needing
/// `min_history` points.
pub fn window_eligible(window: &[TrackPoint], min_history: usize) -> bool {
    window.len() >= min_history.max(1)
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: BTreeMap<AgentId, TrackState>,
    last_tick: Option<u64>,
    births: u64,
    terminations: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: BTreeMap::new(),
            last_tick: None,
            births: 0,
            terminations: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Applies one frame. Frames must arrive on consecutive ticks.
    pub fn update(&mut self, frame: &ObservedFrame) -> Result<(), TrackerError> {
        if let Some(last) = self.last_tick {
            if frame.tick != last + 1 {
                return Err(TrackerError::Sequencing {
                    expected: last + 1,
                    got: frame.tick,
                });
            }
        }
        self.last_tick = Some(frame.tick);

        let alpha = self.config.alpha;
        for track in self.tracks.values_mut() {
            track.ticks_since_seen += 1;
        }
        for (id, z) in &frame.detections {
            match self.tracks.get_mut(id) {
                Some(track) => {
                    if track.ticks_since_seen == 0 {
                        return Err(TrackerError::DuplicateDetection {
                            agent: id.clone(),
                            tick: frame.tick,
                        });
                    }
                    // Written as an increment so a constant input is an exact fixed point.
                    track.smoothed_pos = if alpha == 1.0 {
                        *z
                    } else {
                        track.smoothed_pos + (*z - track.smoothed_pos) * alpha
                    };
                    track.history.push_back(TrackPoint::new(frame.tick, track.smoothed_pos));
                    if track.history.len() > self.config.h_max {
                        track.history.pop_front();
                    }
                    track.ticks_since_seen = 0;
                }
                None => {
                    self.tracks
                        .insert(id.clone(), TrackState::born(id.clone(), frame.tick, *z));
                    self.births += 1;
                }
            }
        }
        let max_missed = self.config.max_missed;
        let before = self.tracks.len();
        self.tracks.retain(|_, t| t.ticks_since_seen <= max_missed);
        self.terminations += (before - self.tracks.len()) as u64;
        Ok(())
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.last_tick
    }

    pub fn live_tracks(&self) -> impl Iterator<Item = &TrackState> + '_ {
        self.tracks.values()
    }

    pub fn track(&self, id: &AgentId) -> Option<&TrackState> {
        self.tracks.get(id)
    }

    pub fn history_window(&self, id: &AgentId, h: usize) -> Result<Vec<TrackPoint>, TrackerError> {
        if h > self.config.h_max {
            return Err(TrackerError::InvalidWindow(h));
        }
        self.tracks
            .get(id)
            .ok_or_else(|| TrackerError::NoTrack(id.clone()))?
            .history_window(h)
    }

    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn terminations(&self) -> u64 {
        self.terminations
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackerError {
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error("frames must be consecutive: expected tick {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },
    #[error("agent {agent} detected twice at tick {tick}")]
    DuplicateDetection { agent: AgentId, tick: u64 },
    #[error("no live track for agent {0}")]
    NoTrack(AgentId),
    #[error("history window length {0} is out of range")]
    InvalidWindow(usize),
}
