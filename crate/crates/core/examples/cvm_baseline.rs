//! Scores the constant velocity baseline on straight-line walkers (exact)
//! and on wandering walkers seen through sensor noise.

use dynbench::metrics::{format_metric, NullSink};
use dynbench::predictors::Cvm;
use dynbench::replay::{run_scene, ReplayConfig};
use dynbench::scene_source::{generate_synthetic_scene, ObservationModel, WalkerConfig};
use dynbench::tracker::TrackerConfig;

fn main() -> anyhow::Result<()> {
    let exact = TrackerConfig {
        alpha: 1.0,
        ..TrackerConfig::default()
    };
    let linear = generate_synthetic_scene(&WalkerConfig::linear(10, 100), 1)?;
    let r = run_scene(&linear, &ObservationModel::perfect(), &exact, &mut Cvm, &ReplayConfig::default(), &mut NullSink)?;
    println!(
        "linear walkers:    minDynADE {:e}  minDynFDE {:e}",
        r.metrics.min_dyn_ade.unwrap_or(f64::NAN),
        r.metrics.min_dyn_fde.unwrap_or(f64::NAN)
    );

    let wandering = generate_synthetic_scene(&WalkerConfig::standard(10, 100), 1)?;
    let noisy = ObservationModel {
        noise_sigma: 0.05,
        ..ObservationModel::perfect()
    };
    let r = run_scene(&wandering, &noisy, &TrackerConfig::default(), &mut Cvm, &ReplayConfig::default(), &mut NullSink)?;
    let c = r.metrics.counts;
    println!(
        "wandering, noisy:  minDynADE {}  minDynFDE {}  ({} scored, {} expired, {} ineligible)",
        format_metric(r.metrics.min_dyn_ade),
        format_metric(r.metrics.min_dyn_fde),
        c.matured,
        c.expired,
        c.ineligible
    );
    Ok(())
}
