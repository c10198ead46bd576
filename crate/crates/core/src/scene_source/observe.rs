use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vec2;
use crate::seed::SeedBuilder;

use super::{ObservationModel, ObservedFrame, Scene, SceneError};

/// Simulates detector output: one frame per tick in `0..duration_ticks`.
///
/// The rng stream is derived from `(model.seed, scene_id)` and consumes the
/// same number of draws for every alive agent whether or not it is detected,
/// so changing the range or dropout rate does not reshuffle the noise.
pub fn observe(scene: &Scene, model: &ObservationModel) -> Result<Vec<ObservedFrame>, SceneError> {
    model.validate()?;
    let mut rng = SeedBuilder::new(model.seed).str(&scene.scene_id).rng();
    let mut frames = Vec::with_capacity(scene.duration_ticks as usize);
    for tick in 0..scene.duration_ticks {
        let mut detections = Vec::new();
        for track in scene.agents() {
            let Some(truth) = track.position_at(tick) else {
                continue;
            };
            let u: f64 = rng.random();
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            if u < model.dropout_prob || truth.distance(model.ego) > model.sensor_range {
                continue;
            }
            let z = if model.noise_sigma > 0.0 {
                truth + Vec2::new(nx, ny) * model.noise_sigma
            } else {
                truth
            };
            detections.push((track.agent_id.clone(), z));
        }
        frames.push(ObservedFrame { tick, detections });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_source::{generate_synthetic_scene, WalkerConfig};

    fn scene() -> Scene {
        generate_synthetic_scene(&WalkerConfig::standard(10, 100), 5).unwrap()
    }

    #[test]
    fn perfect_observation_is_ground_truth() {
        let s = scene();
        let frames = observe(&s, &ObservationModel::perfect()).unwrap();
        assert_eq!(frames.len(), 100);
        for f in &frames {
            let alive = s.agents().iter().filter(|a| a.alive_at(f.tick)).count();
            assert_eq!(f.detections.len(), alive);
            for (id, z) in &f.detections {
                assert_eq!(s.agent(id).unwrap().position_at(f.tick), Some(*z));
            }
        }
    }

    #[test]
    fn dropout_is_deterministic() {
        let s = scene();
        let model = ObservationModel {
            dropout_prob: 0.5,
            noise_sigma: 0.2,
            seed: 11,
            ..ObservationModel::perfect()
        };
        let a = observe(&s, &model).unwrap();
        assert_eq!(a, observe(&s, &model).unwrap());
        let total: usize = a.iter().map(|f| f.detections.len()).sum();
        let alive: usize = s.alive_counts().iter().sum();
        assert!(total < alive && total > alive / 4);
    }

    #[test]
    fn noise_std_matches_sigma() {
        let cfg = WalkerConfig {
            birth_window: 0,
            speed_min: 0.0,
            speed_max: 0.0,
            ..WalkerConfig::linear(50, 200)
        };
        let s = generate_synthetic_scene(&cfg, 2).unwrap();
        let model = ObservationModel {
            noise_sigma: 0.1,
            seed: 4,
            ..ObservationModel::perfect()
        };
        let frames = observe(&s, &model).unwrap();
        let mut dx = Vec::new();
        let mut dy = Vec::new();
        for f in &frames {
            for (id, z) in &f.detections {
                let t = s.agent(id).unwrap().position_at(f.tick).unwrap();
                dx.push(z.x - t.x);
                dy.push(z.y - t.y);
            }
        }
        assert_eq!(dx.len(), 10_000);
        for d in [dx, dy] {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((std - 0.1).abs() < 0.01, "std {std}");
        }
    }

    #[test]
    fn sensor_range_limits_detections() {
        let s = scene();
        let model = ObservationModel {
            sensor_range: 10.0,
            ..ObservationModel::perfect()
        };
        for f in observe(&s, &model).unwrap() {
            for (id, z) in &f.detections {
                assert!(z.norm() <= 10.0);
                assert!(s.agent(id).is_some());
            }
        }
    }
}
