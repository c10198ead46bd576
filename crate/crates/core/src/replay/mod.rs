//! The tick loop.
//!
//! Per tick: observe, update the tracker, assemble an H-limited batch, invoke
//! the predictor under the deadline, reduce each record to `k` candidates,
//! park it until `issue_tick + f`, and score every prediction maturing at this
//! tick against the raw ground truth.

mod deadline;

use std::collections::{BTreeMap, BTreeSet};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::metrics::{
    finalize_scene, score_instant, MetricSink, OperationalCounts, SceneAccumulator, SceneMetrics,
};
use crate::predictors::{
    select_top_k, validate_records, ContractError, PredictionRecord, PredictionRequest, Predictor,
    PredictorError, RequestItem,
};
use crate::scene_source::{observe, AgentId, ObservationModel, Scene, SceneError, Track, TrackPoint};
use crate::seed::SeedBuilder;
use crate::tracker::{Tracker, TrackerConfig, TrackerError};

pub use deadline::{enforce_deadline, Deadlined, TimeMode};
use deadline::PredictorRunner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub delta_t: f64,
    /// History window handed to the predictor.
    pub h: usize,
    /// Prediction horizon in ticks.
    pub f: usize,
    /// Candidate budget per prediction.
    pub k: usize,
    pub time_mode: TimeMode,
    /// Per-invocation deadline in seconds.
    pub deadline: f64,
    /// Seed for random top-k selection.
    pub selection_seed: u64,
    /// Keep the tracker's smoothed tracks in the scene result.
    pub record_tracks: bool,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            delta_t: 0.4,
            h: 8,
            f: 12,
            k: 1,
            time_mode: TimeMode::Virtual,
            deadline: 0.4,
            selection_seed: 0,
            record_tracks: false,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        let bad = |m: String| Err(ReplayError::InvalidConfig(m));
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return bad(format!("delta_t must be positive, got {}", self.delta_t));
        }
        if self.h == 0 || self.f == 0 || self.k == 0 {
            return bad(format!(
                "h, f and k must be >= 1 (h={}, f={}, k={})",
                self.h, self.f, self.k
            ));
        }
        if !(self.deadline > 0.0 && self.deadline.is_finite()) {
            return bad(format!("deadline must be positive, got {}", self.deadline));
        }
        if self.time_mode == TimeMode::Realtime && self.deadline > self.delta_t {
            return bad(format!(
                "realtime deadline {} exceeds delta_t {}",
                self.deadline, self.delta_t
            ));
        }
        Ok(())
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_secs_f64(self.deadline)
    }
}

/// Operational counts of one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickOutcome {
    pub tick: u64,
    pub issued: u64,
    pub timeouts: u64,
    pub ineligible: u64,
    pub matured: u64,
}

/// Advisory wall-clock statistics; excluded from determinism comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub wall_seconds: f64,
    pub mean_inference_seconds: f64,
    pub max_inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneResult {
    pub metrics: SceneMetrics,
    pub ticks: Vec<TickOutcome>,
    pub timing: TimingSummary,
    /// Smoothed tracker output, split into contiguous lives.
    pub tracks: Option<Scene>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("invalid replay config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("internal sequencing error: {0}")]
    Tracker(#[from] TrackerError),
    #[error("scene {scene} aborted at tick {tick}: {message}")]
    PredictorCrashed {
        scene: String,
        tick: u64,
        message: String,
    },
    #[error("scene {scene} aborted at tick {tick}: predictor broke its contract: {source}")]
    Contract {
        scene: String,
        tick: u64,
        #[source]
        source: ContractError,
    },
}

/// Replays one scene through the tracker and predictor.
///
/// Every scored instant is also forwarded to `sink`.
pub fn run_scene(
    scene: &Scene,
    observation: &ObservationModel,
    tracker_config: &TrackerConfig,
    predictor: &mut dyn Predictor,
    config: &ReplayConfig,
    sink: &mut dyn MetricSink,
) -> Result<SceneResult, ReplayError> {
    config.validate()?;
    if (scene.delta_t - config.delta_t).abs() > 1e-9 {
        return Err(ReplayError::InvalidConfig(format!(
            "scene {} has delta_t {}, replay expects {}",
            scene.scene_id, scene.delta_t, config.delta_t
        )));
    }
    if config.h > tracker_config.h_max {
        return Err(ReplayError::InvalidConfig(format!(
            "h={} exceeds tracker h_max={}",
            config.h, tracker_config.h_max
        )));
    }
    let frames = observe(scene, observation)?;
    let mut tracker = Tracker::new(*tracker_config)?;
    predictor.reset(&scene.scene_id);
    let min_history = predictor.min_history();

    let mut engine = Engine {
        scene,
        config,
        counts: OperationalCounts::default(),
        accumulator: SceneAccumulator::new(),
        pending: BTreeMap::new(),
        select_rng: SeedBuilder::new(config.selection_seed)
            .str(&scene.scene_id)
            .rng(),
        inference: Vec::new(),
    };
    let mut ticks = Vec::with_capacity(frames.len());
    let mut lives = TrackRecorder::default();
    let start = Instant::now();
    let tick_len = Duration::from_secs_f64(config.delta_t);

    let outcome: Result<(), ReplayError> = thread::scope(|scope| {
        let mut runner = PredictorRunner::new(scope, predictor, config.time_mode);
        let result = (|| {
            for frame in &frames {
                if config.time_mode == TimeMode::Realtime {
                    let due = tick_len * frame.tick as u32;
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        thread::sleep(wait);
                    }
                }
                tracker.update(frame)?;
                if config.record_tracks {
                    lives.observe(&tracker, frame.tick);
                }
                let request = engine.build_request(&tracker, frame.tick, min_history);
                let mut outcome = TickOutcome {
                    tick: frame.tick,
                    ineligible: request.items.iter().filter(|i| !i.eligible).count() as u64,
                    ..Default::default()
                };
                engine.counts.ineligible += outcome.ineligible;
                engine.counts.invocations += 1;
                let eligible = request.eligible_items().count() as u64;
                let issued_before = engine.counts.issued;
                match runner.invoke(request.clone()) {
                    Deadlined::TimedOut { .. } => {
                        engine.counts.timeouts += 1;
                        outcome.timeouts = 1;
                    }
                    Deadlined::Completed { value, elapsed } => {
                        engine.inference.push(elapsed);
                        engine.accept(&request, value, elapsed, eligible)?;
                    }
                }
                outcome.issued = engine.counts.issued - issued_before;
                outcome.matured = engine.mature(frame.tick, sink);
                ticks.push(outcome);
            }
            Ok(())
        })();
        runner.shutdown();
        result
    });
    outcome?;

    engine.counts.ticks = frames.len() as u64;
    engine.counts.expired += engine.pending.values().map(|v| v.len() as u64).sum::<u64>();
    let timing = engine.timing(start.elapsed());
    let metrics = finalize_scene(&scene.scene_id, engine.accumulator.agents(), engine.counts);
    let tracks = if config.record_tracks {
        Some(lives.into_scene(scene)?)
    } else {
        None
    };
    Ok(SceneResult {
        metrics,
        ticks,
        timing,
        tracks,
    })
}

struct Engine<'a> {
    scene: &'a Scene,
    config: &'a ReplayConfig,
    counts: OperationalCounts,
    accumulator: SceneAccumulator,
    pending: BTreeMap<u64, Vec<PredictionRecord>>,
    select_rng: rand_chacha::ChaCha8Rng,
    inference: Vec<Duration>,
}

impl Engine<'_> {
    fn build_request(&self, tracker: &Tracker, tick: u64, min_history: usize) -> PredictionRequest {
        let items = tracker
            .live_tracks()
            .map(|track| {
                let history = track
                    .history_window(self.config.h)
                    .expect("live track has a window");
                // Occluded tracks keep their history but are not predicted
                // until detected again.
                let eligible = track.ticks_since_seen == 0 && history.len() >= min_history.max(1);
                RequestItem {
                    agent_id: track.agent_id.clone(),
                    history,
                    eligible,
                }
            })
            .collect();
        PredictionRequest {
            tick,
            delta_t: self.config.delta_t,
            items,
            horizon_f: self.config.f,
            k: self.config.k,
            deadline: self.config.deadline(),
        }
    }

    fn accept(
        &mut self,
        request: &PredictionRequest,
        value: Result<Vec<PredictionRecord>, PredictorError>,
        elapsed: Duration,
        eligible: u64,
    ) -> Result<(), ReplayError> {
        let records = match value {
            Ok(records) => records,
            Err(PredictorError::Timeout) => {
                self.counts.timeouts += 1;
                return Ok(());
            }
            Err(PredictorError::RequestFailed(_)) => {
                self.counts.request_failures += 1;
                return Ok(());
            }
            Err(PredictorError::Fatal(message)) => {
                return Err(ReplayError::PredictorCrashed {
                    scene: self.scene.scene_id.clone(),
                    tick: request.tick,
                    message,
                })
            }
        };
        validate_records(request, &records).map_err(|source| ReplayError::Contract {
            scene: self.scene.scene_id.clone(),
            tick: request.tick,
            source,
        })?;
        self.counts.missing += eligible - records.len() as u64;
        let maturity = request.tick + self.config.f as u64;
        for mut record in records {
            record.inference_elapsed = elapsed;
            if record.candidates.len() < self.config.k {
                self.counts.candidate_shortfall += 1;
            }
            let record = select_top_k(record, self.config.k, &mut self.select_rng);
            self.counts.issued += 1;
            self.pending.entry(maturity).or_default().push(record);
        }
        Ok(())
    }

    fn mature(&mut self, tick: u64, sink: &mut dyn MetricSink) -> u64 {
        let Some(records) = self.pending.remove(&tick) else {
            return 0;
        };
        let mut matured = 0;
        for record in records {
            let gt = self
                .scene
                .agent(&record.agent_id)
                .and_then(|t| t.future_after(record.issue_tick, self.config.f));
            match gt {
                Some(gt) => {
                    let err = score_instant(&record, &gt).expect("validated record lengths");
                    self.accumulator.push(&err);
                    sink.push(&err);
                    matured += 1;
                }
                None => self.counts.expired += 1,
            }
        }
        self.counts.matured += matured;
        matured
    }

    fn timing(&self, wall: Duration) -> TimingSummary {
        let n = self.inference.len();
        let secs: Vec<f64> = self.inference.iter().map(Duration::as_secs_f64).collect();
        TimingSummary {
            wall_seconds: wall.as_secs_f64(),
            mean_inference_seconds: if n == 0 { 0.0 } else { secs.iter().sum::<f64>() / n as f64 },
            max_inference_seconds: secs.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Collects smoothed tracker points per track life.
#[derive(Default)]
struct TrackRecorder {
    lives: BTreeMap<AgentId, Vec<Vec<TrackPoint>>>,
    live: BTreeSet<AgentId>,
}

impl TrackRecorder {
    fn observe(&mut self, tracker: &Tracker, tick: u64) {
        let mut now = BTreeSet::new();
        for track in tracker.live_tracks() {
            now.insert(track.agent_id.clone());
            let lives = self.lives.entry(track.agent_id.clone()).or_default();
            if !self.live.contains(&track.agent_id) {
                lives.push(Vec::new());
            }
            if track.ticks_since_seen == 0 {
                lives
                    .last_mut()
                    .expect("life started")
                    .push(TrackPoint::new(tick, track.smoothed_pos));
            }
        }
        self.live = now;
    }

    fn into_scene(self, scene: &Scene) -> Result<Scene, SceneError> {
        let mut tracks = Vec::new();
        for (agent, lives) in self.lives {
            for (n, points) in lives.into_iter().enumerate() {
                let id = if n == 0 {
                    agent.clone()
                } else {
                    AgentId(format!("{agent}~{n}"))
                };
                tracks.extend(Track::from_points(id, points)?.split_contiguous());
            }
        }
        Scene::new(
            format!("{}-tracks", scene.scene_id),
            scene.delta_t,
            tracks,
            Some(scene.duration_ticks),
        )
    }
}

#[cfg(test)]
mod tests;
