use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dynbench::bridge::peer::{serve, PredictorPeer};
use dynbench::harness::report::{render, ReportFormat};
use dynbench::harness::{self, ExperimentConfig, ExperimentMode, ExperimentResult, PredictorSpec};
use dynbench::replay::TimeMode;
use dynbench::scene_source::{
    filter_scenes, generate_dataset, load_trajectory_log, write_scene_jsonl, EthUcyOptions, LogFormat,
    Scene, WalkerConfig,
};

#[derive(Parser)]
#[command(version, about = "Online evaluation harness for pedestrian motion prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert trajectory logs into scene_jsonl
    Ingest {
        #[arg(long, default_value = "eth_ucy")]
        format: LogFormat,
        /// Annotation intervals per tick
        #[arg(long, default_value_t = 1)]
        stride: u32,
        #[arg(long, default_value_t = 0.4)]
        delta_t: f64,
        #[arg(long)]
        min_concurrent: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Generate synthetic walker scenes
    Gen {
        #[arg(long, default_value_t = 10)]
        agents: usize,
        #[arg(long, default_value_t = 200)]
        ticks: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        /// `standard` wanders between waypoints, `linear` walks straight
        #[arg(long, default_value = "standard")]
        preset: String,
        #[arg(long, default_value_t = 0.4)]
        delta_t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay scenes through one predictor
    Run(RunArgs),
    /// Run an experiment grid from a TOML config
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table printed to stdout
        #[arg(long, default_value = "txt")]
        format: ReportFormat,
    },
    /// Render tables from a result file
    Report {
        result: PathBuf,
        #[arg(long, default_value = "txt")]
        format: ReportFormat,
    },
    /// Serve an in-process predictor over the bridge protocol on stdio
    #[command(hide = true)]
    Peer {
        #[arg(long, default_value = "cvm")]
        model: PredictorSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        sigma_speed: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma_angle: f64,
        #[arg(long)]
        max_k: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenes: PathBuf,
    /// cvm, noisy_cvm, prob_cvm or bridge:<address>; repeatable
    #[arg(long, required = true)]
    predictor: Vec<PredictorSpec>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    h: usize,
    #[arg(long, default_value_t = 12)]
    f: usize,
    #[arg(long, default_value_t = 0.4)]
    delta_t: f64,
    #[arg(long, default_value_t = 0.4)]
    deadline: f64,
    #[arg(long, default_value = "virtual")]
    time_mode: TimeMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    sigma_speed: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma_angle: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long)]
    sensor_range: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    max_missed: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the tracker's smoothed tracks as scene_jsonl
    #[arg(long)]
    dump_tracks: Option<PathBuf>,
    #[arg(long, default_value = "txt")]
    format: ReportFormat,
}

fn write_scenes(path: &PathBuf, scenes: &[Scene]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_scene_jsonl(scenes, BufWriter::new(file))?;
    Ok(())
}

fn finish(result: &ExperimentResult, out: Option<&PathBuf>, format: ReportFormat) -> Result<()> {
    if let Some(path) = out {
        std::fs::write(path, result.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", render(result, format));
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let config = ExperimentConfig {
        scenes: Some(args.scenes),
        mode: ExperimentMode::KSweep,
        predictors: args.predictor,
        sigma_speed: args.sigma_speed,
        sigma_angle: args.sigma_angle,
        k_values: vec![args.k],
        h_values: vec![args.h],
        k: args.k,
        h: args.h,
        f: args.f,
        delta_t: args.delta_t,
        deadline: args.deadline,
        seed: args.seed,
        time_mode: args.time_mode,
        noise_sigma: args.noise_sigma,
        dropout_prob: args.dropout,
        sensor_range: args.sensor_range,
        alpha: args.alpha,
        max_missed: args.max_missed,
        ..ExperimentConfig::default()
    };
    config.validate()?;
    let scenes = config.load_scenes()?;
    if let Some(path) = &args.dump_tracks {
        write_scenes(path, &harness::tracked_scenes(&config, &scenes)?)?;
    }
    let result = harness::run_experiment(&config, &scenes)?;
    finish(&result, args.out.as_ref(), args.format)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest {
            format,
            stride,
            delta_t,
            min_concurrent,
            out,
            paths,
        } => {
            let options = EthUcyOptions { stride, delta_t };
            let mut scenes = Vec::new();
            for path in &paths {
                scenes.extend(load_trajectory_log(path, format, options)?);
            }
            let read = scenes.len();
            if let Some(n) = min_concurrent {
                scenes = filter_scenes(scenes, n);
            }
            write_scenes(&out, &scenes)?;
            eprintln!("{} of {read} scenes written to {}", scenes.len(), out.display());
        }
        Command::Gen {
            agents,
            ticks,
            seed,
            scenes,
            preset,
            delta_t,
            out,
        } => {
            let mut walker = match preset.as_str() {
                "standard" => WalkerConfig::standard(agents, ticks),
                "linear" => WalkerConfig::linear(agents, ticks),
                other => bail!("unknown preset `{other}` (standard, linear)"),
            };
            walker.delta_t = delta_t;
            write_scenes(&out, &generate_dataset(&walker, seed, scenes)?)?;
        }
        Command::Run(args) => run(args)?,
        Command::Sweep { config, out, format } => {
            let config = ExperimentConfig::load(&config)?;
            let scenes = config.load_scenes()?;
            let result = harness::run_experiment(&config, &scenes)?;
            finish(&result, out.as_ref(), format)?;
        }
        Command::Report { result, format } => {
            let text = std::fs::read_to_string(&result).with_context(|| format!("reading {}", result.display()))?;
            let result = ExperimentResult::from_json(&text)?;
            print!("{}", render(&result, format));
        }
        Command::Peer {
            model,
            seed,
            sigma_speed,
            sigma_angle,
            max_k,
        } => {
            let config = ExperimentConfig {
                sigma_speed,
                sigma_angle,
                ..ExperimentConfig::default()
            };
            let mut peer = PredictorPeer::new(harness::build_predictor(&config, &model, seed)?);
            if let Some(k) = max_k {
                peer = peer.with_max_k(k);
            }
            let stdout = io::stdout();
            serve(BufReader::new(io::stdin()), stdout.lock(), &mut peer)?;
            io::stdout().flush()?;
        }
    }
    Ok(())
}
