//! A predictor slower than the 0.4 s budget. Virtual time reports every tick
//! as a timeout; realtime additionally keeps the wall clock on pace.

use std::time::{Duration, Instant};

use dynbench::metrics::{format_metric, NullSink};
use dynbench::predictors::mock::SleepyPredictor;
use dynbench::predictors::Cvm;
use dynbench::replay::{run_scene, ReplayConfig, TimeMode};
use dynbench::scene_source::{generate_synthetic_scene, ObservationModel, WalkerConfig};
use dynbench::tracker::TrackerConfig;

fn main() -> anyhow::Result<()> {
    let scene = generate_synthetic_scene(&WalkerConfig::linear(3, 6), 2)?;
    for mode in [TimeMode::Virtual, TimeMode::Realtime] {
        let config = ReplayConfig {
            f: 2,
            time_mode: mode,
            ..ReplayConfig::default()
        };
        let mut slow = SleepyPredictor::new(Cvm, Duration::from_millis(600));
        let start = Instant::now();
        let r = run_scene(&scene, &ObservationModel::perfect(), &TrackerConfig::default(), &mut slow, &config, &mut NullSink)?;
        println!(
            "{mode:?}: {} ticks, {} timeouts, minDynADE {}, wall {:.2} s",
            r.metrics.counts.ticks,
            r.metrics.counts.timeouts,
            format_metric(r.metrics.min_dyn_ade),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
