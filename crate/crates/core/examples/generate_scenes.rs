//! Generates a small synthetic dataset and prints per-scene concurrency.
//!
//! cargo run --example generate_scenes -- [out.jsonl]

use std::fs::File;
use std::io::BufWriter;

use dynbench::scene_source::{filter_scenes, generate_dataset, write_scene_jsonl, WalkerConfig};

fn main() -> anyhow::Result<()> {
    let walkers = WalkerConfig::standard(10, 200);
    let scenes = generate_dataset(&walkers, 1, 5)?;
    for scene in &scenes {
        println!(
            "{}: {} agents, {} ticks, peak concurrency {}",
            scene.scene_id,
            scene.agents().len(),
            scene.duration_ticks,
            scene.max_concurrency()
        );
    }
    let dense = filter_scenes(scenes, 8);
    println!("{} scenes reach 8 concurrent agents", dense.len());
    if let Some(path) = std::env::args().nth(1) {
        write_scene_jsonl(&dense, BufWriter::new(File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
