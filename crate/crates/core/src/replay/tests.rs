use super::*;
use crate::geometry::Vec2;
use crate::metrics::NullSink;
use crate::predictors::mock::{OraclePredictor, RecordingPredictor, SleepyPredictor};
use crate::predictors::{CandidateTrajectory, Cvm, Modality, NoisyCvm};
use crate::scene_source::{generate_synthetic_scene, WalkerConfig};

fn exact_tracker() -> TrackerConfig {
    TrackerConfig {
        alpha: 1.0,
        max_missed: 0,
        h_max: 20,
    }
}

fn linear_scene(seed: u64) -> Scene {
    generate_synthetic_scene(&WalkerConfig::linear(10, 100), seed).unwrap()
}

fn two_agent_scene() -> Scene {
    // a: ticks 0..=19 straight line; b: ticks 5..=9 (too short to mature)
    let a = Track::contiguous("a".into(), 0, (0..20).map(|t| Vec2::new(t as f64 * 0.5, 1.0))).unwrap();
    let b = Track::contiguous("b".into(), 5, (0..5).map(|t| Vec2::new(0.0, t as f64))).unwrap();
    Scene::new("two", 0.4, vec![a, b], Some(20)).unwrap()
}

fn cfg(k: usize, f: usize) -> ReplayConfig {
    ReplayConfig {
        k,
        f,
        ..ReplayConfig::default()
    }
}

#[test]
fn oracle_scores_zero() {
    let scene = generate_synthetic_scene(&WalkerConfig::standard(10, 100), 2).unwrap();
    let obs = ObservationModel {
        noise_sigma: 0.3,
        ..ObservationModel::perfect()
    };
    let mut oracle = OraclePredictor::new(vec![scene.clone()]);
    let r = run_scene(&scene, &obs, &TrackerConfig::default(), &mut oracle, &cfg(1, 12), &mut NullSink).unwrap();
    assert_eq!(r.metrics.min_dyn_ade, Some(0.0));
    assert_eq!(r.metrics.min_dyn_fde, Some(0.0));
    assert!(r.metrics.counts.matured > 0);
}

#[test]
fn cvm_is_exact_on_linear_walkers() {
    let scene = linear_scene(4);
    let r = run_scene(
        &scene,
        &ObservationModel::perfect(),
        &exact_tracker(),
        &mut Cvm,
        &cfg(1, 12),
        &mut NullSink,
    )
    .unwrap();
    assert!(r.metrics.min_dyn_ade.unwrap() < 1e-9);
    assert!(r.metrics.min_dyn_fde.unwrap() < 1e-9);
}

#[test]
fn accounting_reconciles() {
    let scene = two_agent_scene();
    let mut sink = Vec::new();
    let r = run_scene(
        &scene,
        &ObservationModel::perfect(),
        &exact_tracker(),
        &mut Cvm,
        &cfg(1, 4),
        &mut sink,
    )
    .unwrap();
    let c = r.metrics.counts;
    assert_eq!(c.ticks, 20);
    assert_eq!(c.invocations, 20);
    assert_eq!(c.issued, c.matured + c.expired);
    // a is eligible at ticks 1..=19 and matures for issue ticks 1..=15
    // b is eligible at ticks 6..=9 and never has 4 future points
    assert_eq!(c.issued, 19 + 4);
    assert_eq!(c.matured, 15);
    assert_eq!(c.expired, 4 + 4);
    // first tick of each agent has a single point
    assert_eq!(c.ineligible, 2);
    assert_eq!(sink.len() as u64, c.matured);
    assert!(sink.iter().all(|e| e.agent_id.as_str() == "a" && e.ade.len() == 1));
    let per_tick: u64 = r.ticks.iter().map(|t| t.matured).sum();
    assert_eq!(per_tick, c.matured);
}

#[test]
fn virtual_timeouts_are_absent_metrics() {
    let scene = two_agent_scene();
    let mut slow = SleepyPredictor::new(Cvm, Duration::from_millis(30));
    let config = ReplayConfig {
        deadline: 0.01,
        ..cfg(1, 4)
    };
    let r = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut slow, &config, &mut NullSink).unwrap();
    assert_eq!(r.metrics.counts.timeouts, 20);
    assert_eq!(r.metrics.counts.matured, 0);
    assert_eq!(r.metrics.min_dyn_ade, None);
}

#[test]
fn realtime_abandons_slow_predictor_on_pace() {
    let scene = Scene::new(
        "rt",
        0.1,
        vec![Track::contiguous("a".into(), 0, (0..6).map(|t| Vec2::new(t as f64, 0.0))).unwrap()],
        None,
    )
    .unwrap();
    let mut slow = SleepyPredictor::new(Cvm, Duration::from_millis(150));
    let config = ReplayConfig {
        delta_t: 0.1,
        deadline: 0.1,
        time_mode: TimeMode::Realtime,
        f: 2,
        ..ReplayConfig::default()
    };
    let start = Instant::now();
    let r = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut slow, &config, &mut NullSink).unwrap();
    let wall = start.elapsed().as_secs_f64();
    assert_eq!(r.metrics.counts.timeouts, 6);
    assert_eq!(r.metrics.counts.matured, 0);
    assert!(wall <= 6.0 * (0.1 + 0.15), "wall {wall}");
}

#[test]
fn realtime_fast_predictor_scores() {
    let a = Track::contiguous("a".into(), 0, (0..8).map(|t| Vec2::new(t as f64, 0.0))).unwrap();
    let fast = Scene::new("fast", 0.4, vec![a], None).unwrap();
    let config = ReplayConfig {
        delta_t: 0.4,
        deadline: 0.4,
        time_mode: TimeMode::Realtime,
        f: 4,
        ..ReplayConfig::default()
    };
    let r = run_scene(&fast, &ObservationModel::perfect(), &exact_tracker(), &mut Cvm, &config, &mut NullSink).unwrap();
    assert_eq!(r.metrics.counts.timeouts, 0);
    assert!(r.metrics.counts.matured > 0);
}

#[test]
fn virtual_mode_is_deterministic() {
    let scene = generate_synthetic_scene(&WalkerConfig::standard(12, 120), 8).unwrap();
    let obs = ObservationModel {
        noise_sigma: 0.2,
        dropout_prob: 0.1,
        seed: 5,
        ..ObservationModel::perfect()
    };
    let run = || {
        let mut p = NoisyCvm::new(0.1, 0.3, 21).with_pool(20);
        run_scene(&scene, &obs, &TrackerConfig::default(), &mut p, &cfg(5, 12), &mut NullSink).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.ticks, b.ticks);
}

#[test]
fn windows_never_exceed_h() {
    let scene = linear_scene(1);
    let (mut p, log) = RecordingPredictor::new(Cvm);
    let config = ReplayConfig { h: 3, ..cfg(1, 12) };
    run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut p, &config, &mut NullSink).unwrap();
    let log = log.lock().unwrap();
    assert_eq!(log.len(), 100);
    assert!(log.iter().flat_map(|l| &l.history_lengths).all(|&n| n <= 3));
    assert!(log.iter().flat_map(|l| &l.history_lengths).any(|&n| n == 3));
}

struct Faulty(u8);

impl Predictor for Faulty {
    fn name(&self) -> &str {
        "faulty"
    }
    fn modality(&self) -> Modality {
        Modality::Stochastic
    }
    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        match self.0 {
            0 => panic!("boom"),
            1 => Ok(request
                .eligible_items()
                .map(|i| PredictionRecord {
                    agent_id: i.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates: vec![CandidateTrajectory::new(vec![Vec2::ZERO; request.horizon_f - 1])],
                    inference_elapsed: Duration::ZERO,
                    modality: Modality::Stochastic,
                })
                .collect()),
            2 => Err(PredictorError::RequestFailed("flaky".into())),
            _ => Ok(request
                .eligible_items()
                .take(1)
                .map(|i| PredictionRecord {
                    agent_id: i.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates: vec![CandidateTrajectory::new(vec![Vec2::ZERO; request.horizon_f])],
                    inference_elapsed: Duration::ZERO,
                    modality: Modality::Stochastic,
                })
                .collect()),
        }
    }
}

#[test]
fn crash_aborts_scene() {
    let scene = two_agent_scene();
    for mode in [TimeMode::Virtual, TimeMode::Realtime] {
        let config = ReplayConfig { time_mode: mode, ..cfg(1, 4) };
        let err = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut Faulty(0), &config, &mut NullSink)
            .unwrap_err();
        assert!(matches!(err, ReplayError::PredictorCrashed { tick: 0, .. }), "{err}");
    }
}

#[test]
fn contract_violation_aborts_scene() {
    let err = run_scene(
        &two_agent_scene(),
        &ObservationModel::perfect(),
        &exact_tracker(),
        &mut Faulty(1),
        &cfg(1, 4),
        &mut NullSink,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ReplayError::Contract {
            source: ContractError::HorizonLength { .. },
            ..
        }
    ));
}

#[test]
fn request_failures_and_shortfall_are_counted() {
    let scene = two_agent_scene();
    let r = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut Faulty(2), &cfg(1, 4), &mut NullSink).unwrap();
    assert_eq!(r.metrics.counts.request_failures, 20);
    let r = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut Faulty(3), &cfg(3, 4), &mut NullSink).unwrap();
    let c = r.metrics.counts;
    assert_eq!(c.candidate_shortfall, c.issued);
    // ticks 6..=9 have two eligible agents but only one record
    assert_eq!(c.missing, 4);
}

#[test]
fn rejects_bad_configs() {
    let scene = two_agent_scene();
    let run = |c: ReplayConfig| {
        run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut Cvm, &c, &mut NullSink)
    };
    assert!(run(ReplayConfig { k: 0, ..cfg(1, 4) }).is_err());
    assert!(run(ReplayConfig { h: 50, ..cfg(1, 4) }).is_err());
    assert!(run(ReplayConfig { delta_t: 0.1, ..cfg(1, 4) }).is_err());
    assert!(run(ReplayConfig {
        time_mode: TimeMode::Realtime,
        deadline: 0.5,
        ..cfg(1, 4)
    })
    .is_err());
}

#[test]
fn recorded_tracks_match_ground_truth_when_exact() {
    let scene = linear_scene(6);
    let config = ReplayConfig {
        record_tracks: true,
        ..cfg(1, 12)
    };
    let r = run_scene(&scene, &ObservationModel::perfect(), &exact_tracker(), &mut Cvm, &config, &mut NullSink).unwrap();
    let tracks = r.tracks.unwrap();
    assert_eq!(tracks.agents().len(), scene.agents().len());
    for t in tracks.agents() {
        assert_eq!(t.points(), scene.agent(&t.agent_id).unwrap().points());
    }
}
