//! History ablation: CVM only reads the last two points, so its column does
//! not move with H. The bridged copy shows the windows stay within H on the
//! wire.

use dynbench::harness::report::{render, ReportFormat};
use dynbench::harness::{ablate_history, ExperimentConfig};
use dynbench::scene_source::{generate_dataset, WalkerConfig};

fn main() -> anyhow::Result<()> {
    let scenes = generate_dataset(&WalkerConfig::standard(10, 100), 21, 6)?;
    let config = ExperimentConfig {
        predictors: vec!["cvm".parse().unwrap(), "bridge:inproc:noisy_cvm".parse().unwrap()],
        h_values: vec![2, 4, 8],
        k: 5,
        noise_sigma: 0.05,
        ..ExperimentConfig::default()
    };
    let result = ablate_history(&config, &scenes)?;
    print!("{}", render(&result, ReportFormat::Markdown));
    for cell in result.cells.iter().filter(|c| c.wire.is_some()) {
        let wire = cell.wire.unwrap();
        println!("H={}: {} requests, longest history {}", cell.key.h, wire.requests, wire.max_history);
    }
    Ok(())
}
