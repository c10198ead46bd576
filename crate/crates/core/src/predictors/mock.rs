//! Diagnostic predictors: ground-truth oracle, artificial latency and
//! request recording.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene_source::Scene;

use super::{
    CandidateTrajectory, Modality, PredictionRecord, PredictionRequest, Predictor, PredictorError,
};

/// Returns the ground-truth future of every eligible agent whose full horizon
/// exists. Scores zero by construction.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    scenes: Vec<Scene>,
    current: Option<usize>,
}

impl OraclePredictor {
    pub fn new(scenes: Vec<Scene>) -> Self {
        Self {
            scenes,
            current: None,
        }
    }
}

impl Predictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn modality(&self) -> Modality {
        Modality::Deterministic
    }

    fn min_history(&self) -> usize {
        1
    }

    fn reset(&mut self, scene_id: &str) {
        self.current = self.scenes.iter().position(|s| s.scene_id == scene_id);
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        let scene = self
            .current
            .map(|i| &self.scenes[i])
            .ok_or_else(|| PredictorError::Fatal("oracle has no ground truth for this scene".into()))?;
        Ok(request
            .eligible_items()
            .filter_map(|item| {
                let future = scene
                    .agent(&item.agent_id)?
                    .future_after(request.tick, request.horizon_f)?;
                Some(PredictionRecord {
                    agent_id: item.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates: vec![CandidateTrajectory::new(future)],
                    inference_elapsed: Duration::ZERO,
                    modality: Modality::Deterministic,
                })
            })
            .collect())
    }
}

/// Sleeps before delegating, on every request.
pub struct SleepyPredictor<P> {
    inner: P,
    delay: Duration,
}

impl<P: Predictor> SleepyPredictor<P> {
    pub fn new(inner: P, delay: Duration) -> Self {
        Self { inner, delay }
    }
}

impl<P: Predictor> Predictor for SleepyPredictor<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn modality(&self) -> Modality {
        self.inner.modality()
    }
    fn min_history(&self) -> usize {
        self.inner.min_history()
    }
    fn reset(&mut self, scene_id: &str) {
        self.inner.reset(scene_id)
    }
    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        thread::sleep(self.delay);
        self.inner.predict(request)
    }
}

/// Sleeps a random duration in `[base, base + spread]` before delegating.
///
/// The rng is seeded from the system clock, so repeated runs differ.
pub struct JitteryPredictor<P> {
    inner: P,
    base: Duration,
    spread: Duration,
    rng: ChaCha8Rng,
}

impl<P: Predictor> JitteryPredictor<P> {
    pub fn new(inner: P, base: Duration, spread: Duration) -> Self {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        Self {
            inner,
            base,
            spread,
            rng: ChaCha8Rng::seed_from_u64(nanos),
        }
    }
}

impl<P: Predictor> Predictor for JitteryPredictor<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn modality(&self) -> Modality {
        self.inner.modality()
    }
    fn min_history(&self) -> usize {
        self.inner.min_history()
    }
    fn reset(&mut self, scene_id: &str) {
        self.inner.reset(scene_id)
    }
    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        let extra = self.spread.mul_f64(self.rng.random::<f64>());
        thread::sleep(self.base + extra);
        self.inner.predict(request)
    }
}

/// Summary of one request as seen by a [`RecordingPredictor`].
#[derive(Debug, Clone, PartialEq)]
pub struct RequestLog {
    pub tick: u64,
    pub batch_size: usize,
    pub history_lengths: Vec<usize>,
}

/// Records the shape of every request before delegating.
pub struct RecordingPredictor<P> {
    inner: P,
    log: Arc<Mutex<Vec<RequestLog>>>,
}

impl<P: Predictor> RecordingPredictor<P> {
    pub fn new(inner: P) -> (Self, Arc<Mutex<Vec<RequestLog>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            Self {
                inner,
                log: Arc::clone(&log),
            },
            log,
        )
    }
}

impl<P: Predictor> Predictor for RecordingPredictor<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn modality(&self) -> Modality {
        self.inner.modality()
    }
    fn min_history(&self) -> usize {
        self.inner.min_history()
    }
    fn reset(&mut self, scene_id: &str) {
        self.inner.reset(scene_id)
    }
    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        self.log.lock().unwrap().push(RequestLog {
            tick: request.tick,
            batch_size: request.items.len(),
            history_lengths: request.items.iter().map(|i| i.history.len()).collect(),
        });
        self.inner.predict(request)
    }
}
