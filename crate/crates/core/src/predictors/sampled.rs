use std::time::Duration;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vec2;
use crate::seed::SeedBuilder;

use super::cvm::{extrapolate, final_velocity};
use super::{
    CandidateTrajectory, Modality, PredictionRecord, PredictionRequest, Predictor, PredictorError,
    RequestItem,
};

/// One sampled velocity perturbation: speed scaled by `1 + speed`, heading
/// rotated by `angle` radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub speed: f64,
    pub angle: f64,
}

impl Perturbation {
    fn apply(self, step: Vec2) -> Vec2 {
        (step * (1.0 + self.speed)).rotate(self.angle)
    }
}

/// Normalized Gaussian density weights of perturbations under independent
/// zero-mean normals with the given standard deviations.
///
/// A zero sigma drops that component from the density.
pub fn gaussian_weights(perturbations: &[Perturbation], sigma_speed: f64, sigma_angle: f64) -> Vec<f64> {
    let term = |v: f64, sigma: f64| if sigma > 0.0 { -0.5 * (v / sigma).powi(2) } else { 0.0 };
    let log_w: Vec<f64> = perturbations
        .iter()
        .map(|p| term(p.speed, sigma_speed) + term(p.angle, sigma_angle))
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone)]
struct Sampler {
    sigma_speed: f64,
    sigma_angle: f64,
    seed: u64,
    pool: Option<usize>,
    scene_id: String,
}

impl Sampler {
    /// Candidates are drawn in order from a stream keyed by
    /// `(seed, scene, tick, agent)`, so the first `k` candidates do not depend
    /// on how many are requested.
    fn perturbations(&self, tick: u64, item: &RequestItem, count: usize) -> Vec<Perturbation> {
        let mut rng = SeedBuilder::new(self.seed)
            .str(&self.scene_id)
            .u64(tick)
            .str(item.agent_id.as_str())
            .rng();
        (0..count)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Perturbation {
                    speed: a * self.sigma_speed,
                    angle: b * self.sigma_angle,
                }
            })
            .collect()
    }

    fn predict(
        &self,
        request: &PredictionRequest,
        modality: Modality,
    ) -> Vec<PredictionRecord> {
        let count = self.pool.unwrap_or(0).max(request.k);
        request
            .eligible_items()
            .filter_map(|item| {
                let (last, step) = final_velocity(&item.history)?;
                let perts = self.perturbations(request.tick, item, count);
                let weights = (modality == Modality::Probabilistic)
                    .then(|| gaussian_weights(&perts, self.sigma_speed, self.sigma_angle));
                let candidates = perts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| CandidateTrajectory {
                        points: extrapolate(last, p.apply(step), request.tick, request.horizon_f),
                        probability: weights.as_ref().map(|w| w[i]),
                    })
                    .collect();
                Some(PredictionRecord {
                    agent_id: item.agent_id.clone(),
                    issue_tick: request.tick,
                    candidates,
                    inference_elapsed: Duration::ZERO,
                    modality,
                })
            })
            .collect()
    }
}

/// CVM with one random velocity perturbation per candidate (stochastic, no
/// probabilities).
#[derive(Debug, Clone)]
pub struct NoisyCvm {
    sampler: Sampler,
}

impl NoisyCvm {
    pub fn new(sigma_speed: f64, sigma_angle: f64, seed: u64) -> Self {
        Self {
            sampler: Sampler {
                sigma_speed,
                sigma_angle,
                seed,
                pool: None,
                scene_id: String::new(),
            },
        }
    }

    /// Always sample at least `pool` candidates, leaving the reduction to `k`
    /// to top-k selection.
    pub fn with_pool(mut self, pool: usize) -> Self {
        self.sampler.pool = Some(pool);
        self
    }
}

impl Predictor for NoisyCvm {
    fn name(&self) -> &str {
        "noisy_cvm"
    }

    fn modality(&self) -> Modality {
        Modality::Stochastic
    }

    fn reset(&mut self, scene_id: &str) {
        self.sampler.scene_id = scene_id.to_owned();
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        Ok(self.sampler.predict(request, Modality::Stochastic))
    }
}

/// [`NoisyCvm`] whose candidates carry their normalized sampling density as
/// probability.
#[derive(Debug, Clone)]
pub struct ProbCvm {
    sampler: Sampler,
}

impl ProbCvm {
    pub fn new(sigma_speed: f64, sigma_angle: f64, seed: u64) -> Self {
        Self {
            sampler: NoisyCvm::new(sigma_speed, sigma_angle, seed).sampler,
        }
    }

    pub fn with_pool(mut self, pool: usize) -> Self {
        self.sampler.pool = Some(pool);
        self
    }
}

impl Predictor for ProbCvm {
    fn name(&self) -> &str {
        "prob_cvm"
    }

    fn modality(&self) -> Modality {
        Modality::Probabilistic
    }

    fn reset(&mut self, scene_id: &str) {
        self.sampler.scene_id = scene_id.to_owned();
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        Ok(self.sampler.predict(request, Modality::Probabilistic))
    }
}
