//! Best-of-N: more candidates can only lower the minimum error. Prints a
//! k-sweep table for the deterministic and sampling baselines.

use dynbench::harness::report::{render, ReportFormat};
use dynbench::harness::{run_experiment, ExperimentConfig};
use dynbench::scene_source::{generate_dataset, WalkerConfig};

fn main() -> anyhow::Result<()> {
    let scenes = generate_dataset(&WalkerConfig::standard(10, 100), 11, 8)?;
    let config = ExperimentConfig {
        predictors: ["cvm", "noisy_cvm", "prob_cvm"]
            .iter()
            .map(|p| p.parse())
            .collect::<Result<_, _>>()
            .map_err(anyhow::Error::msg)?,
        k_values: vec![1, 5, 10],
        h_values: vec![8],
        noise_sigma: 0.05,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&config, &scenes)?;
    print!("{}", render(&result, ReportFormat::Text));
    Ok(())
}
