//! Repeats one scene 20 times per predictor. In virtual time every run is
//! identical, so the spread is exactly zero.

use dynbench::harness::report::{render, ReportFormat};
use dynbench::harness::{repeatability, ExperimentConfig};
use dynbench::scene_source::{generate_dataset, WalkerConfig};

fn main() -> anyhow::Result<()> {
    let scenes = generate_dataset(&WalkerConfig::standard(10, 120), 5, 1)?;
    let config = ExperimentConfig {
        predictors: vec!["cvm".parse().unwrap(), "noisy_cvm".parse().unwrap(), "prob_cvm".parse().unwrap()],
        k: 5,
        h: 8,
        noise_sigma: 0.05,
        ..ExperimentConfig::default()
    };
    let result = repeatability(&config, &scenes, 20)?;
    print!("{}", render(&result, ReportFormat::Text));
    Ok(())
}
