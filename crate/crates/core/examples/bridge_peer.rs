//! Talks to an external predictor over the line-delimited JSON protocol.
//!
//! Without arguments a CVM peer runs in-process over pipes. Pass a command
//! (for example `target/debug/dynbench peer --model noisy_cvm`) to launch a
//! real subprocess instead.

use dynbench::bridge::peer::{spawn_in_process, PredictorPeer};
use dynbench::bridge::{BridgeEndpoint, BridgePredictor, Hello, Transport, PROTOCOL_VERSION};
use dynbench::metrics::{format_metric, NullSink};
use dynbench::predictors::{Cvm, Predictor};
use dynbench::replay::{run_scene, ReplayConfig, TimeMode};
use dynbench::scene_source::{generate_synthetic_scene, ObservationModel, WalkerConfig};
use dynbench::tracker::TrackerConfig;

fn main() -> anyhow::Result<()> {
    let command: Vec<String> = std::env::args().skip(1).collect();
    let transport = if command.is_empty() {
        spawn_in_process(PredictorPeer::new(Cvm))
    } else {
        Transport::spawn_stdio(&command.join(" "))?
    };
    let config = ReplayConfig::default();
    let hello = Hello {
        version: PROTOCOL_VERSION,
        delta_t: config.delta_t,
        h: config.h,
        f: config.f,
        k: config.k,
    };
    let endpoint = BridgeEndpoint::handshake(transport, hello)?;
    println!("peer: {:?}", endpoint.capabilities());
    let mut predictor = BridgePredictor::new(endpoint, TimeMode::Virtual);

    let scene = generate_synthetic_scene(&WalkerConfig::standard(8, 80), 4)?;
    let r = run_scene(&scene, &ObservationModel::perfect(), &TrackerConfig::default(), &mut predictor, &config, &mut NullSink)?;
    println!(
        "{}: minDynADE {} minDynFDE {} ({} scored, mean round trip {:.2} ms)",
        predictor.name(),
        format_metric(r.metrics.min_dyn_ade),
        format_metric(r.metrics.min_dyn_fde),
        r.metrics.counts.matured,
        r.timing.mean_inference_seconds * 1e3
    );
    Ok(())
}
