//! Runs the EMA tracker on a noisy, lossy observation stream and prints the
//! history windows a predictor would receive.

use dynbench::scene_source::{generate_synthetic_scene, observe, ObservationModel, WalkerConfig};
use dynbench::tracker::{Tracker, TrackerConfig};

fn main() -> anyhow::Result<()> {
    let scene = generate_synthetic_scene(&WalkerConfig::standard(4, 30), 3)?;
    let model = ObservationModel {
        noise_sigma: 0.1,
        dropout_prob: 0.15,
        seed: 1,
        ..ObservationModel::perfect()
    };
    let mut tracker = Tracker::new(TrackerConfig::default())?;
    for frame in observe(&scene, &model)? {
        tracker.update(&frame)?;
        if frame.tick % 10 != 9 {
            continue;
        }
        println!("tick {} ({} detections)", frame.tick, frame.detections.len());
        for track in tracker.live_tracks() {
            let window = track.history_window(4)?;
            let ticks: Vec<u64> = window.iter().map(|p| p.tick).collect();
            println!(
                "  {} missed {} window ticks {:?}",
                track.agent_id, track.ticks_since_seen, ticks
            );
        }
    }
    println!("births {}, terminations {}", tracker.births(), tracker.terminations());
    Ok(())
}
