//! Plugging in your own model: implement `Predictor` and hand it to the
//! replay engine. This one predicts that everybody stands still.

use std::time::Duration;

use dynbench::metrics::{format_metric, NullSink};
use dynbench::predictors::{
    CandidateTrajectory, Cvm, Modality, PredictionRecord, PredictionRequest, Predictor, PredictorError,
};
use dynbench::replay::{run_scene, ReplayConfig};
use dynbench::scene_source::{generate_synthetic_scene, ObservationModel, WalkerConfig};
use dynbench::tracker::TrackerConfig;

struct StandStill;

impl Predictor for StandStill {
    fn name(&self) -> &str {
        "stand_still"
    }

    fn modality(&self) -> Modality {
        Modality::Deterministic
    }

    fn min_history(&self) -> usize {
        1
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        Ok(request
            .eligible_items()
            .map(|item| {
                let last = item.history.last().expect("eligible items have history").pos;
                PredictionRecord {
                    agent_id: item.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates: vec![CandidateTrajectory::new(vec![last; request.horizon_f])],
                    inference_elapsed: Duration::ZERO,
                    modality: Modality::Deterministic,
                }
            })
            .collect())
    }
}

fn main() -> anyhow::Result<()> {
    let scene = generate_synthetic_scene(&WalkerConfig::standard(10, 100), 8)?;
    let config = ReplayConfig::default();
    let obs = ObservationModel::perfect();
    let tracker = TrackerConfig::default();
    let mut models: Vec<Box<dyn Predictor>> = vec![Box::new(StandStill), Box::new(Cvm)];
    for model in &mut models {
        let r = run_scene(&scene, &obs, &tracker, model.as_mut(), &config, &mut NullSink)?;
        println!(
            "{:<12} minDynADE {}  minDynFDE {}",
            model.name(),
            format_metric(r.metrics.min_dyn_ade),
            format_metric(r.metrics.min_dyn_fde)
        );
    }
    Ok(())
}
