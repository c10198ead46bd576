//! Experiment grids over predictors, candidate budgets and history windows.
//!
//! An experiment is a list of cells, one per `(predictor, k, h, repetition)`.
//! Every cell replays all scenes and aggregates them into [`DatasetMetrics`].
//! Cells never share rng streams, so dropping a predictor from a config leaves
//! the other cells' numbers unchanged.

pub mod report;
pub mod spec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::peer::{spawn_in_process, PredictorPeer};
use crate::bridge::{
    BridgeEndpoint, BridgeError, BridgePredictor, Direction, HarnessMessage, Hello, Transport, WireLog,
    PROTOCOL_VERSION,
};
use crate::metrics::{aggregate_dataset, DatasetMetrics, NullSink, SceneMetrics};
use crate::predictors::mock::{JitteryPredictor, OraclePredictor, SleepyPredictor};
use crate::predictors::{Cvm, Modality, NoisyCvm, ProbCvm, Predictor};
use crate::replay::{run_scene, ReplayConfig, ReplayError, TimeMode};
use crate::scene_source::{
    filter_scenes, load_trajectory_log, EthUcyOptions, LogFormat, ObservationModel, Scene, SceneError,
};
use crate::seed::SeedBuilder;
use crate::tracker::TrackerConfig;

pub use spec::{BridgeAddress, PredictorKind, PredictorSpec, SamplerParams};

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "DYNBENCH_WORKERS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Candidate budget on the column axis.
    #[default]
    KSweep,
    /// History window on the column axis, `k` fixed.
    HAblation,
    /// One scene replayed `repetitions` times per predictor.
    Repeatability,
}

impl std::str::FromStr for ExperimentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "k_sweep" => Ok(Self::KSweep),
            "h_ablation" => Ok(Self::HAblation),
            "repeatability" => Ok(Self::Repeatability),
            other => Err(format!("unknown mode `{other}` (k_sweep, h_ablation, repeatability)")),
        }
    }
}

/// Flat key/value experiment description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scene file. Relative paths resolve against the config file.
    pub scenes: Option<PathBuf>,
    pub scenes_format: String,
    /// Drop scenes that never reach this many concurrent agents.
    pub min_concurrent: Option<usize>,
    pub mode: ExperimentMode,
    pub predictors: Vec<PredictorSpec>,
    pub sigma_speed: f64,
    pub sigma_angle: f64,
    pub k_values: Vec<usize>,
    pub h_values: Vec<usize>,
    /// `k` for H-ablation and repeatability cells.
    pub k: usize,
    /// `h` for repeatability cells.
    pub h: usize,
    pub f: usize,
    pub delta_t: f64,
    /// Per-tick deadline in seconds.
    pub deadline: f64,
    /// Defaults to 1, or 20 in repeatability mode.
    pub repetitions: Option<usize>,
    /// Scene replayed in repeatability mode; defaults to the first by id.
    pub scene: Option<String>,
    pub seed: u64,
    pub time_mode: TimeMode,
    pub noise_sigma: f64,
    pub dropout_prob: f64,
    pub sensor_range: Option<f64>,
    pub alpha: f64,
    pub max_missed: u32,
    pub h_max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tracker = TrackerConfig::default();
        Self {
            scenes: None,
            scenes_format: "scene_jsonl".into(),
            min_concurrent: None,
            mode: ExperimentMode::KSweep,
            predictors: vec![PredictorSpec::from_str_unchecked("cvm")],
            sigma_speed: 0.05,
            sigma_angle: 0.3,
            k_values: vec![1, 5, 10],
            h_values: vec![2, 4, 8],
            k: 5,
            h: 8,
            f: 12,
            delta_t: 0.4,
            deadline: 0.4,
            repetitions: None,
            scene: None,
            seed: 0,
            time_mode: TimeMode::Virtual,
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            sensor_range: None,
            alpha: tracker.alpha,
            max_missed: tracker.max_missed,
            h_max: tracker.h_max,
        }
    }
}

impl PredictorSpec {
    fn from_str_unchecked(s: &str) -> Self {
        s.parse().expect("built-in predictor spec")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("cannot read config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("bridge `{predictor}` failed before the run: {source}")]
    Bridge {
        predictor: String,
        #[source]
        source: BridgeError,
    },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; a relative `scenes` path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ConfigIo {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        if let (Some(scenes), Some(dir)) = (&config.scenes, path.parent()) {
            if scenes.is_relative() {
                config.scenes = Some(dir.join(scenes));
            }
        }
        Ok(config)
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions.unwrap_or(match self.mode {
            ExperimentMode::Repeatability => 20,
            _ => 1,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.predictors.is_empty() {
            return bad("predictors must not be empty".into());
        }
        if self.k_values.is_empty() || self.h_values.is_empty() {
            return bad("k_values and h_values must not be empty".into());
        }
        if self.k_values.contains(&0) || self.k == 0 {
            return bad("k must be >= 1".into());
        }
        let reps = self.repetitions();
        if reps == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.mode == ExperimentMode::Repeatability && reps < 2 {
            return bad(format!("repeatability needs at least 2 repetitions, got {reps}"));
        }
        if let Some(h) = self.h_values.iter().chain([&self.h]).find(|&&h| h == 0 || h > self.h_max) {
            return bad(format!("h={h} must be in 1..={}", self.h_max));
        }
        self.tracker()
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.observation(0)
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.replay(1, 1, 0)
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            alpha: self.alpha,
            max_missed: self.max_missed,
            h_max: self.h_max,
        }
    }

    /// The observation stream is shared by all cells so they see the same
    /// detections.
    pub fn observation(&self, seed: u64) -> ObservationModel {
        ObservationModel {
            noise_sigma: self.noise_sigma,
            dropout_prob: self.dropout_prob,
            sensor_range: self.sensor_range.unwrap_or(f64::INFINITY),
            seed,
            ..ObservationModel::perfect()
        }
    }

    fn replay(&self, k: usize, h: usize, selection_seed: u64) -> ReplayConfig {
        ReplayConfig {
            delta_t: self.delta_t,
            h,
            f: self.f,
            k,
            time_mode: self.time_mode,
            deadline: self.deadline,
            selection_seed,
            record_tracks: false,
        }
    }

    /// Loads and density-filters the configured scene file.
    pub fn load_scenes(&self) -> Result<Vec<Scene>, HarnessError> {
        let path = self
            .scenes
            .as_ref()
            .ok_or_else(|| HarnessError::InvalidConfig("no scenes path".into()))?;
        let format: LogFormat = self.scenes_format.parse().map_err(HarnessError::InvalidConfig)?;
        let options = EthUcyOptions {
            delta_t: self.delta_t,
            ..EthUcyOptions::default()
        };
        let scenes = load_trajectory_log(path, format, options)?;
        Ok(match self.min_concurrent {
            Some(n) => filter_scenes(scenes, n),
            None => scenes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub predictor: PredictorSpec,
    pub k: usize,
    pub h: usize,
    pub repetition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed { message: String },
}

/// What crossed the wire for a bridged cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireSummary {
    pub requests: usize,
    /// Longest history sent for any agent.
    pub max_history: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub wall_seconds: f64,
    pub mean_inference_seconds: f64,
    pub max_inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(flatten)]
    pub key: CellKey,
    #[serde(flatten)]
    pub status: CellStatus,
    pub dataset: Option<DatasetMetrics>,
    /// Advisory; not part of any determinism guarantee.
    pub timing: CellTiming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire: Option<WireSummary>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Everything a report is rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub scene_ids: Vec<String>,
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn cell(&self, predictor: &str, k: usize, h: usize, repetition: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.key.predictor.as_str() == predictor && c.key.k == k && c.key.h == h && c.key.repetition == repetition
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Seed of the predictor's own sampling. It leaves out `k` on purpose: the
/// candidates drawn at `k = 10` then extend those drawn at `k = 5`.
pub fn predictor_seed(base: u64, predictor: &PredictorSpec, h: usize) -> u64 {
    SeedBuilder::new(base)
        .str("predictor")
        .str(predictor.as_str())
        .u64(h as u64)
        .finish()
}

/// Seed of random top-k selection for one cell.
pub fn selection_seed(base: u64, predictor: &PredictorSpec, k: usize, h: usize) -> u64 {
    SeedBuilder::new(base)
        .str("select")
        .str(predictor.as_str())
        .u64(k as u64)
        .u64(h as u64)
        .finish()
}

/// Worker count from `DYNBENCH_WORKERS`, else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the experiment in the configured mode.
pub fn run_experiment(config: &ExperimentConfig, scenes: &[Scene]) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let scenes = select_scenes(config, scenes)?;
    let modalities = preflight(config)?;
    let cells = plan_cells(config, &modalities);
    let results = execute(config, &scenes, &cells);
    Ok(ExperimentResult {
        config: config.clone(),
        scene_ids: scenes.iter().map(|s| s.scene_id.clone()).collect(),
        cells: results,
    })
}

/// H on the column axis with `k` fixed at `config.k`.
pub fn ablate_history(config: &ExperimentConfig, scenes: &[Scene]) -> Result<ExperimentResult, HarnessError> {
    let config = ExperimentConfig {
        mode: ExperimentMode::HAblation,
        ..config.clone()
    };
    run_experiment(&config, scenes)
}

/// Replays one scene `n` times per predictor at `(config.k, config.h)`.
pub fn repeatability(
    config: &ExperimentConfig,
    scenes: &[Scene],
    n: usize,
) -> Result<ExperimentResult, HarnessError> {
    let config = ExperimentConfig {
        mode: ExperimentMode::Repeatability,
        repetitions: Some(n),
        ..config.clone()
    };
    run_experiment(&config, scenes)
}

/// Smoothed tracker output for every scene, as replayed under `config`.
pub fn tracked_scenes(config: &ExperimentConfig, scenes: &[Scene]) -> Result<Vec<Scene>, ReplayError> {
    let observation = config.observation(config.seed);
    let replay = ReplayConfig {
        record_tracks: true,
        time_mode: TimeMode::Virtual,
        ..config.replay(1, config.h, 0)
    };
    scenes
        .iter()
        .map(|scene| {
            let r = run_scene(scene, &observation, &config.tracker(), &mut Cvm, &replay, &mut NullSink)?;
            Ok(r.tracks.expect("tracks were requested"))
        })
        .collect()
}

fn select_scenes(config: &ExperimentConfig, scenes: &[Scene]) -> Result<Vec<Scene>, HarnessError> {
    let mut scenes = scenes.to_vec();
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    if scenes.is_empty() {
        return Err(HarnessError::InvalidConfig("no scenes to run".into()));
    }
    if let Some(bad) = scenes.iter().find(|s| (s.delta_t - config.delta_t).abs() > 1e-9) {
        return Err(HarnessError::InvalidConfig(format!(
            "scene {} has delta_t {}, config has {}",
            bad.scene_id, bad.delta_t, config.delta_t
        )));
    }
    if config.mode == ExperimentMode::Repeatability {
        let chosen = match &config.scene {
            Some(id) => scenes
                .into_iter()
                .find(|s| &s.scene_id == id)
                .ok_or_else(|| HarnessError::InvalidConfig(format!("no scene `{id}`")))?,
            None => scenes.swap_remove(0),
        };
        scenes = vec![chosen];
    }
    Ok(scenes)
}

fn in_process_modality(kind: &PredictorKind) -> Modality {
    match kind {
        PredictorKind::NoisyCvm(_) => Modality::Stochastic,
        PredictorKind::ProbCvm(_) => Modality::Probabilistic,
        _ => Modality::Deterministic,
    }
}

/// Handshakes every bridge once so a dead peer fails the run up front.
fn preflight(config: &ExperimentConfig) -> Result<BTreeMap<String, Modality>, HarnessError> {
    let mut out = BTreeMap::new();
    for spec in &config.predictors {
        let modality = match &spec.kind {
            PredictorKind::Bridge(address) => {
                let fail = |source| HarnessError::Bridge {
                    predictor: spec.to_string(),
                    source,
                };
                let h = config.h_values.iter().copied().chain([config.h]).max().unwrap_or(1);
                let endpoint = connect(config, address, hello(config, 1, h), None).map_err(fail)?;
                let modality = endpoint.modality();
                // Deterministic peers only ever get k = 1 cells.
                let k = match config.mode {
                    _ if modality == Modality::Deterministic => 1,
                    ExperimentMode::KSweep => config.k_values.iter().copied().max().unwrap_or(1),
                    _ => config.k,
                };
                let max_k = endpoint.capabilities().max_k;
                if max_k < k {
                    return Err(fail(BridgeError::Capability(format!(
                        "peer supports max_k={max_k}, experiment requests k={k}"
                    ))));
                }
                modality
            }
            kind => in_process_modality(kind),
        };
        out.insert(spec.to_string(), modality);
    }
    Ok(out)
}

fn plan_cells(config: &ExperimentConfig, modalities: &BTreeMap<String, Modality>) -> Vec<CellKey> {
    let mut cells = Vec::new();
    for spec in &config.predictors {
        let deterministic = modalities[spec.as_str()] == Modality::Deterministic;
        let (ks, hs): (Vec<usize>, Vec<usize>) = match config.mode {
            ExperimentMode::KSweep => (config.k_values.clone(), config.h_values.clone()),
            ExperimentMode::HAblation => (vec![config.k], config.h_values.clone()),
            ExperimentMode::Repeatability => (vec![config.k], vec![config.h]),
        };
        // One candidate is all a deterministic model has.
        let ks = if deterministic { vec![1] } else { ks };
        for &k in &ks {
            for &h in &hs {
                for repetition in 0..config.repetitions() {
                    cells.push(CellKey {
                        predictor: spec.clone(),
                        k,
                        h,
                        repetition,
                    });
                }
            }
        }
    }
    cells
}

fn hello(config: &ExperimentConfig, k: usize, h: usize) -> Hello {
    Hello {
        version: PROTOCOL_VERSION,
        delta_t: config.delta_t,
        h,
        f: config.f,
        k,
    }
}

fn connect(
    config: &ExperimentConfig,
    address: &BridgeAddress,
    hello: Hello,
    log: Option<WireLog>,
) -> Result<BridgeEndpoint, BridgeError> {
    let transport = match address {
        BridgeAddress::Tcp(addr) => Transport::connect_tcp(addr)?,
        BridgeAddress::Stdio(cmd) => Transport::spawn_stdio(cmd)?,
        BridgeAddress::InProcess(inner) => {
            let predictor = build_in_process(config, inner, config.seed, None);
            spawn_in_process(PredictorPeer::new(predictor))
        }
    };
    BridgeEndpoint::handshake_logged(transport, hello, log)
}

/// Builds an in-process predictor by spec, with sigmas defaulted from
/// `config`. Bridges and the ground-truth oracle cannot be built this way.
pub fn build_predictor(
    config: &ExperimentConfig,
    spec: &PredictorSpec,
    seed: u64,
) -> Result<Box<dyn Predictor>, HarnessError> {
    match spec.kind {
        PredictorKind::Bridge(_) | PredictorKind::Oracle => Err(HarnessError::InvalidConfig(format!(
            "`{spec}` is not a standalone predictor"
        ))),
        _ => Ok(build_in_process(config, spec, seed, None)),
    }
}

fn build_in_process(
    config: &ExperimentConfig,
    spec: &PredictorSpec,
    seed: u64,
    scene: Option<&Scene>,
) -> Box<dyn Predictor> {
    let sigmas = |p: &SamplerParams| {
        (
            p.sigma_speed.unwrap_or(config.sigma_speed),
            p.sigma_angle.unwrap_or(config.sigma_angle),
        )
    };
    match &spec.kind {
        PredictorKind::Cvm => Box::new(Cvm),
        PredictorKind::NoisyCvm(p) => {
            let (s, a) = sigmas(p);
            let mut m = NoisyCvm::new(s, a, seed);
            if let Some(pool) = p.pool {
                m = m.with_pool(pool);
            }
            Box::new(m)
        }
        PredictorKind::ProbCvm(p) => {
            let (s, a) = sigmas(p);
            let mut m = ProbCvm::new(s, a, seed);
            if let Some(pool) = p.pool {
                m = m.with_pool(pool);
            }
            Box::new(m)
        }
        PredictorKind::Oracle => Box::new(OraclePredictor::new(scene.into_iter().cloned().collect())),
        PredictorKind::SleepyCvm { delay } => Box::new(SleepyPredictor::new(Cvm, *delay)),
        PredictorKind::JitteryCvm { delay, spread } => Box::new(JitteryPredictor::new(Cvm, *delay, *spread)),
        PredictorKind::Bridge(_) => unreachable!("bridges are connected, not built"),
    }
}

type SceneOutcome = Result<(SceneMetrics, crate::replay::TimingSummary), String>;

fn run_one(
    config: &ExperimentConfig,
    key: &CellKey,
    scene: &Scene,
    predictor: &mut dyn Predictor,
) -> SceneOutcome {
    let replay = config.replay(
        key.k,
        key.h,
        selection_seed(config.seed, &key.predictor, key.k, key.h),
    );
    run_scene(
        scene,
        &config.observation(config.seed),
        &config.tracker(),
        predictor,
        &replay,
        &mut NullSink,
    )
    .map(|r| (r.metrics, r.timing))
    .map_err(|e| e.to_string())
}

fn execute(config: &ExperimentConfig, scenes: &[Scene], cells: &[CellKey]) -> Vec<CellResult> {
    let exclusive = |key: &CellKey| config.time_mode == TimeMode::Realtime || key.predictor.is_timed();
    let mut results: Vec<Option<CellResult>> = vec![None; cells.len()];

    let parallel: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .filter(|(_, key)| !exclusive(key))
        .flat_map(|(c, _)| (0..scenes.len()).map(move |s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .expect("thread pool");
    let outcomes: Vec<((usize, usize), SceneOutcome)> = pool.install(|| {
        parallel
            .par_iter()
            .map(|&(c, s)| {
                let key = &cells[c];
                let seed = predictor_seed(config.seed, &key.predictor, key.h);
                let mut predictor = build_in_process(config, &key.predictor, seed, Some(&scenes[s]));
                ((c, s), run_one(config, key, &scenes[s], predictor.as_mut()))
            })
            .collect()
    });
    let mut by_cell: BTreeMap<usize, Vec<SceneOutcome>> = BTreeMap::new();
    for ((c, _), outcome) in outcomes {
        by_cell.entry(c).or_default().push(outcome);
    }
    for (c, outcomes) in by_cell {
        results[c] = Some(finish_cell(&cells[c], outcomes, None));
    }

    for (c, key) in cells.iter().enumerate().filter(|(_, key)| exclusive(key)) {
        results[c] = Some(run_exclusive(config, scenes, key));
    }
    results.into_iter().map(|r| r.expect("every cell ran")).collect()
}

fn run_exclusive(config: &ExperimentConfig, scenes: &[Scene], key: &CellKey) -> CellResult {
    let seed = predictor_seed(config.seed, &key.predictor, key.h);
    match &key.predictor.kind {
        PredictorKind::Bridge(address) => {
            let log = WireLog::default();
            let started = Instant::now();
            let endpoint = match connect(config, address, hello(config, key.k, key.h), Some(log.clone())) {
                Ok(e) => e,
                Err(e) => return failed(key, format!("bridge: {e}"), started),
            };
            let mut predictor = BridgePredictor::new(endpoint, config.time_mode);
            let outcomes = run_until_failure(scenes, |scene| run_one(config, key, scene, &mut predictor));
            drop(predictor);
            finish_cell(key, outcomes, Some(summarize_wire(&log)))
        }
        _ => {
            let outcomes = run_until_failure(scenes, |scene| {
                let mut predictor = build_in_process(config, &key.predictor, seed, Some(scene));
                run_one(config, key, scene, predictor.as_mut())
            });
            finish_cell(key, outcomes, None)
        }
    }
}

/// A failed scene fails the cell, so the remaining scenes are skipped.
fn run_until_failure(scenes: &[Scene], mut run: impl FnMut(&Scene) -> SceneOutcome) -> Vec<SceneOutcome> {
    let mut out = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let outcome = run(scene);
        let stop = outcome.is_err();
        out.push(outcome);
        if stop {
            break;
        }
    }
    out
}

fn failed(key: &CellKey, message: String, started: Instant) -> CellResult {
    CellResult {
        key: key.clone(),
        status: CellStatus::Failed { message },
        dataset: None,
        timing: CellTiming {
            wall_seconds: started.elapsed().as_secs_f64(),
            ..CellTiming::default()
        },
        wire: None,
    }
}

fn finish_cell(key: &CellKey, outcomes: Vec<SceneOutcome>, wire: Option<WireSummary>) -> CellResult {
    let mut metrics = Vec::with_capacity(outcomes.len());
    let mut timing = CellTiming::default();
    let mut error = None;
    for outcome in outcomes {
        match outcome {
            Ok((m, t)) => {
                timing.wall_seconds += t.wall_seconds;
                timing.mean_inference_seconds += t.mean_inference_seconds;
                timing.max_inference_seconds = timing.max_inference_seconds.max(t.max_inference_seconds);
                metrics.push(m);
            }
            Err(e) => {
                error.get_or_insert(e);
            }
        }
    }
    if !metrics.is_empty() {
        timing.mean_inference_seconds /= metrics.len() as f64;
    }
    let (status, dataset) = match error {
        Some(message) => (CellStatus::Failed { message }, None),
        None => (CellStatus::Ok, Some(aggregate_dataset(metrics))),
    };
    CellResult {
        key: key.clone(),
        status,
        dataset,
        timing,
        wire,
    }
}

fn summarize_wire(log: &WireLog) -> WireSummary {
    let log = log.lock().unwrap();
    let mut summary = WireSummary::default();
    for (direction, line) in log.iter() {
        if *direction != Direction::Sent {
            continue;
        }
        if let Ok(HarnessMessage::Predict(p)) = serde_json::from_str::<HarnessMessage>(line) {
            summary.requests += 1;
            let longest = p.agents.iter().map(|a| a.history.len()).max().unwrap_or(0);
            summary.max_history = summary.max_history.max(longest);
        }
    }
    summary
}
