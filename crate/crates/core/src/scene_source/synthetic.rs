use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::seed::SeedBuilder;

use super::{AgentId, Scene, SceneError, Track};

/// Parameters of the waypoint walker generator.
///
/// Each agent spawns uniformly inside the world box, heads toward a random
/// waypoint and keeps that heading. Every tick it re-targets a fresh
/// waypoint with `waypoint_change_prob`, and its speed is the agent's base
/// speed scaled by `1 + speed_jitter * N(0, 1)`, clamped to `[0, speed_max]`.
/// An agent leaves the scene when its next step would exit the world box or
/// its lifetime runs out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerConfig {
    pub agents: usize,
    pub duration_ticks: u64,
    pub delta_t: f64,
    pub world_min: Vec2,
    pub world_max: Vec2,
    pub speed_min: f64,
    pub speed_max: f64,
    pub waypoint_change_prob: f64,
    pub speed_jitter: f64,
    /// Agents are born uniformly in `0..=birth_window`.
    pub birth_window: u64,
    /// Optional `(min, max)` lifetime in ticks.
    pub lifetime: Option<(u64, u64)>,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            agents: 10,
            duration_ticks: 200,
            delta_t: 0.4,
            world_min: Vec2::new(-30.0, -30.0),
            world_max: Vec2::new(30.0, 30.0),
            speed_min: 0.8,
            speed_max: 1.8,
            waypoint_change_prob: 0.05,
            speed_jitter: 0.05,
            birth_window: 40,
            lifetime: None,
        }
    }
}

impl WalkerConfig {
    /// Constant-velocity walkers: no jitter, no re-targeting.
    pub fn linear(agents: usize, duration_ticks: u64) -> Self {
        Self {
            agents,
            duration_ticks,
            waypoint_change_prob: 0.0,
            speed_jitter: 0.0,
            ..Self::default()
        }
    }

    /// Walkers with occasional turns and mild speed jitter.
    pub fn standard(agents: usize, duration_ticks: u64) -> Self {
        Self {
            agents,
            duration_ticks,
            waypoint_change_prob: 0.04,
            speed_jitter: 0.08,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::InvalidConfig(m));
        if self.agents == 0 {
            return bad("agent count must be positive".into());
        }
        if self.duration_ticks == 0 {
            return bad("duration must be positive".into());
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(SceneError::InvalidDeltaT(self.delta_t));
        }
        if !(self.world_min.x < self.world_max.x && self.world_min.y < self.world_max.y) {
            return bad("world_min must be strictly below world_max".into());
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return bad(format!(
                "speed range [{}, {}] is invalid",
                self.speed_min, self.speed_max
            ));
        }
        if !(0.0..=1.0).contains(&self.waypoint_change_prob) {
            return bad("waypoint_change_prob must be in [0, 1]".into());
        }
        if !(self.speed_jitter >= 0.0 && self.speed_jitter.is_finite()) {
            return bad("speed_jitter must be >= 0".into());
        }
        if let Some((lo, hi)) = self.lifetime {
            if lo == 0 || lo > hi {
                return bad(format!("lifetime range ({lo}, {hi}) is invalid"));
            }
        }
        Ok(())
    }

    fn contains(&self, p: Vec2) -> bool {
        p.x >= self.world_min.x
            && p.x <= self.world_max.x
            && p.y >= self.world_min.y
            && p.y <= self.world_max.y
    }

    fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec2 {
        Vec2::new(
            rng.random_range(self.world_min.x..=self.world_max.x),
            rng.random_range(self.world_min.y..=self.world_max.y),
        )
    }
}

fn heading_towards<R: Rng>(config: &WalkerConfig, from: Vec2, rng: &mut R) -> Vec2 {
    loop {
        let d = config.sample_point(rng) - from;
        let n = d.norm();
        if n > 1e-6 {
            return d * (1.0 / n);
        }
    }
}

/// Generates one scene of waypoint walkers; a pure function of `(config, seed)`.
pub fn generate_synthetic_scene(config: &WalkerConfig, seed: u64) -> Result<Scene, SceneError> {
    config.validate()?;
    let mut agents = Vec::with_capacity(config.agents);
    for i in 0..config.agents {
        let mut rng = SeedBuilder::new(seed).str("walker").u64(i as u64).rng();
        let birth = rng.random_range(0..=config.birth_window.min(config.duration_ticks - 1));
        let lifetime = match config.lifetime {
            Some((lo, hi)) => rng.random_range(lo..=hi),
            None => u64::MAX,
        };
        let end = birth.saturating_add(lifetime).min(config.duration_ticks);
        let base_speed = rng.random_range(config.speed_min..=config.speed_max);

        let mut pos = config.sample_point(&mut rng);
        let mut heading = heading_towards(config, pos, &mut rng);
        let mut positions = vec![pos];
        for _ in birth + 1..end {
            if config.waypoint_change_prob > 0.0 && rng.random_bool(config.waypoint_change_prob) {
                heading = heading_towards(config, pos, &mut rng);
            }
            let speed = if config.speed_jitter > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                (base_speed * (1.0 + config.speed_jitter * z)).clamp(0.0, config.speed_max)
            } else {
                base_speed
            };
            let next = pos + heading * (speed * config.delta_t);
            if !config.contains(next) {
                break;
            }
            pos = next;
            positions.push(pos);
        }
        agents.push(Track::contiguous(
            AgentId::new(format!("ped{i:03}")),
            birth,
            positions,
        )?);
    }
    Scene::new(
        format!("synthetic-{seed}"),
        config.delta_t,
        agents,
        Some(config.duration_ticks),
    )
}

/// `count` scenes with per-scene seeds derived from `base_seed`.
pub fn generate_dataset(
    config: &WalkerConfig,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Scene>, SceneError> {
    (0..count)
        .map(|i| {
            let mut scene =
                generate_synthetic_scene(config, SeedBuilder::new(base_seed).u64(i as u64).finish())?;
            scene.scene_id = format!("synthetic-{base_seed}-{i:03}");
            Ok(scene)
        })
        .collect()
}
