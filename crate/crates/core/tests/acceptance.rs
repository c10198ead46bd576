//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without a test harness so the lines always print.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynbench::harness::report::{render, repeatability_rows, ReportFormat};
use dynbench::harness::{self, ExperimentConfig, ExperimentMode, ExperimentResult};
use dynbench::metrics::{ade, aggregate_dataset, fde, format_metric, score_instant, InstantError};
use dynbench::predictors::mock::SleepyPredictor;
use dynbench::predictors::{CandidateTrajectory, Cvm, Modality, NoisyCvm, PredictionRecord};
use dynbench::replay::{run_scene, ReplayConfig, TimeMode};
use dynbench::scene_source::{generate_dataset, AgentId, ObservationModel, Scene, Track, WalkerConfig};
use dynbench::tracker::TrackerConfig;
use dynbench::Vec2;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

/// The standard noisy-walker fixture: wandering walkers seen through 5 cm
/// observation noise and the default tracker.
fn noisy_fixture(scenes: usize, seed: u64) -> (Vec<Scene>, ExperimentConfig) {
    let scenes = generate_dataset(&WalkerConfig::standard(10, 100), 1000 + seed, scenes).unwrap();
    let config = ExperimentConfig {
        noise_sigma: 0.05,
        sigma_angle: 0.3,
        seed,
        ..ExperimentConfig::default()
    };
    (scenes, config)
}

fn metric(result: &ExperimentResult, predictor: &str, k: usize, h: usize) -> Option<f64> {
    result.cell(predictor, k, h, 0)?.dataset.as_ref()?.min_dyn_ade
}

// Independent reference: explicit loops, no shared helpers.
fn brute_force(cands: &[Vec<Vec2>], gt: &[Vec2]) -> (Vec<f64>, Vec<f64>, usize, usize) {
    let dist = |a: Vec2, b: Vec2| ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)).sqrt();
    let mut ades = Vec::new();
    let mut fdes = Vec::new();
    for c in cands {
        let mut sum = 0.0;
        for j in 0..gt.len() {
            sum += dist(c[j], gt[j]);
        }
        ades.push(sum / gt.len() as f64);
        fdes.push(dist(c[gt.len() - 1], gt[gt.len() - 1]));
    }
    let first_min = |v: &[f64]| {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] < v[best] {
                best = i;
            }
        }
        best
    };
    let (ia, ifd) = (first_min(&ades), first_min(&fdes));
    (ades, fdes, ia, ifd)
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let f = rng.random_range(1..=15);
        let k = rng.random_range(1..=12);
        let point = |rng: &mut ChaCha8Rng| Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let gt: Vec<Vec2> = (0..f).map(|_| point(&mut rng)).collect();
        let cands: Vec<Vec<Vec2>> = (0..k).map(|_| (0..f).map(|_| point(&mut rng)).collect()).collect();
        let record = PredictionRecord {
            agent_id: AgentId::new("a"),
            issue_tick: i,
            candidates: cands
                .iter()
                .map(|c| CandidateTrajectory {
                    points: c.clone(),
                    probability: None,
                })
                .collect(),
            inference_elapsed: Duration::ZERO,
            modality: Modality::Stochastic,
        };
        let got = score_instant(&record, &gt).map_err(|e| e.to_string())?;
        let (ades, fdes, ia, ifd) = brute_force(&cands, &gt);
        for j in 0..k {
            worst = worst
                .max((ade(&cands[j], &gt).unwrap() - ades[j]).abs())
                .max((fde(&cands[j], &gt).unwrap() - fdes[j]).abs())
                .max((got.ade[j] - ades[j]).abs())
                .max((got.fde[j] - fdes[j]).abs());
        }
        worst = worst
            .max((got.min_ade - ades[ia]).abs())
            .max((got.min_fde - fdes[ifd]).abs());
        if (got.argmin_ade, got.argmin_fde) != (ia, ifd) {
            return Err(format!("fixture {i}: argmin ({}, {}) vs ({ia}, {ifd})", got.argmin_ade, got.argmin_fde));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && secs < 5.0,
        format!("1000 fixtures, max |diff| = {worst:.1e}, {secs:.2} s"),
        format!("max |diff| = {worst:.1e} (tol 1e-12), {secs:.2} s (limit 5 s)"),
    )
}

fn cvm_exactness() -> Outcome {
    let start = Instant::now();
    let scenes = generate_dataset(&WalkerConfig::linear(10, 100), 77, 10).unwrap();
    let config = ExperimentConfig {
        predictors: vec!["cvm".parse().unwrap()],
        k_values: vec![1],
        h_values: vec![8],
        alpha: 1.0,
        ..ExperimentConfig::default()
    };
    let result = harness::run_experiment(&config, &scenes).map_err(|e| e.to_string())?;
    let d = result.cells[0].dataset.as_ref().ok_or("cell failed")?;
    let secs = start.elapsed().as_secs_f64();
    let (a, f) = (d.min_dyn_ade.ok_or("no ADE")?, d.min_dyn_fde.ok_or("no FDE")?);
    check(
        a.abs() <= 1e-9 && f.abs() <= 1e-9 && secs < 10.0 && d.scenes_scored == 10,
        format!("minDynADE {a:.1e}, minDynFDE {f:.1e} over {} matured, {secs:.2} s", d.counts.matured),
        format!("minDynADE {a:e}, minDynFDE {f:e}, scenes {}, {secs:.2} s", d.scenes_scored),
    )
}

fn best_of_n() -> Outcome {
    let (scenes, mut config) = noisy_fixture(20, 3);
    config.predictors = vec!["noisy_cvm".parse().unwrap()];
    config.k_values = vec![1, 5, 10];
    config.h_values = vec![8];
    let result = harness::run_experiment(&config, &scenes).map_err(|e| e.to_string())?;
    let m = |k| metric(&result, "noisy_cvm", k, 8).ok_or(format!("k={k} absent"));
    let (k1, k5, k10) = (m(1)?, m(5)?, m(10)?);

    // Superset-min must hold instant by instant, not only in aggregate.
    let tracker = config.tracker();
    let observation = config.observation(config.seed);
    let mut violations = 0;
    for scene in &scenes[..5] {
        let seed = harness::predictor_seed(config.seed, &config.predictors[0], 8);
        let per_k: Vec<BTreeMap<(String, u64), f64>> = [1, 5, 10]
            .iter()
            .map(|&k| {
                let mut sink: Vec<InstantError> = Vec::new();
                let replay = ReplayConfig { k, ..ReplayConfig::default() };
                run_scene(scene, &observation, &tracker, &mut NoisyCvm::new(0.05, 0.3, seed), &replay, &mut sink).unwrap();
                sink.into_iter()
                    .map(|e| ((e.agent_id.0, e.issue_tick), e.min_ade))
                    .collect()
            })
            .collect();
        for (key, v1) in &per_k[0] {
            let (v5, v10) = (per_k[1][key], per_k[2][key]);
            if !(v10 <= v5 && v5 <= *v1) {
                violations += 1;
            }
        }
    }
    check(
        k10 <= k5 && k5 <= k1 && k1 - k5 > 0.05 && k5 - k10 > 0.05 && violations == 0,
        format!("k=1 {k1:.3} > k=5 {k5:.3} > k=10 {k10:.3}, per-instant nesting holds"),
        format!("k=1 {k1:.4}, k=5 {k5:.4}, k=10 {k10:.4}, {violations} per-instant violations"),
    )
}

fn k1_cvm_vs_noisy() -> Outcome {
    let mut wins = 0;
    let (mut cvm_sum, mut noisy_sum) = (0.0, 0.0);
    for seed in 0..10 {
        let (scenes, mut config) = noisy_fixture(30, seed);
        config.predictors = vec!["cvm".parse().unwrap(), "noisy_cvm".parse().unwrap()];
        config.k_values = vec![1];
        config.h_values = vec![8];
        let result = harness::run_experiment(&config, &scenes).map_err(|e| e.to_string())?;
        let c = metric(&result, "cvm", 1, 8).ok_or("cvm absent")?;
        let n = metric(&result, "noisy_cvm", 1, 8).ok_or("noisy_cvm absent")?;
        wins += usize::from(c <= n);
        cvm_sum += c;
        noisy_sum += n;
    }
    let (c, n) = (cvm_sum / 10.0, noisy_sum / 10.0);
    check(
        wins >= 9 && c <= n,
        format!("cvm {c:.3} <= noisy_cvm {n:.3} on average, in {wins}/10 seeds"),
        format!("cvm {c:.4} vs noisy_cvm {n:.4}, cvm wins {wins}/10"),
    )
}

fn timeout_semantics() -> Outcome {
    let track = |id: &str, y: f64| Track::contiguous(id.into(), 0, (0..8).map(|t| Vec2::new(t as f64 * 0.5, y))).unwrap();
    let scene = Scene::new("timeout", 0.4, vec![track("a", 0.0), track("b", 3.0)], None).unwrap();
    let ticks = scene.duration_ticks;
    let config = ExperimentConfig {
        predictors: vec!["sleepy_cvm:delay_ms=600".parse().unwrap()],
        k_values: vec![1],
        h_values: vec![8],
        f: 2,
        ..ExperimentConfig::default()
    };
    let result = harness::run_experiment(&config, std::slice::from_ref(&scene)).map_err(|e| e.to_string())?;
    let d = result.cells[0].dataset.as_ref().ok_or("cell failed")?;
    let table = render(&result, ReportFormat::Text);
    let ade_row = table.lines().find(|l| l.starts_with("minDynADE")).unwrap_or_default();
    let virtual_ok = d.counts.timeouts == ticks
        && d.counts.matured == 0
        && d.min_dyn_ade.is_none()
        && ade_row.split_whitespace().last() == Some("-");

    let realtime = ReplayConfig {
        f: 2,
        time_mode: TimeMode::Realtime,
        ..ReplayConfig::default()
    };
    let start = Instant::now();
    let mut slow = SleepyPredictor::new(Cvm, Duration::from_millis(600));
    let mut sink: Vec<InstantError> = Vec::new();
    let r = run_scene(&scene, &ObservationModel::perfect(), &TrackerConfig::default(), &mut slow, &realtime, &mut sink)
        .map_err(|e| e.to_string())?;
    let wall = start.elapsed().as_secs_f64();
    let limit = ticks as f64 * (0.4 + 0.15);
    let realtime_ok = r.metrics.counts.timeouts == ticks && sink.is_empty() && wall <= limit;
    check(
        virtual_ok && realtime_ok,
        format!(
            "{ticks} ticks: virtual {} timeouts, cell `{}`; realtime {} timeouts, wall {wall:.2} s <= {limit:.2} s",
            d.counts.timeouts,
            format_metric(d.min_dyn_ade),
            r.metrics.counts.timeouts
        ),
        format!(
            "virtual timeouts {} matured {} row `{ade_row}`; realtime timeouts {} scored {} wall {wall:.2} s (limit {limit:.2})",
            d.counts.timeouts,
            d.counts.matured,
            r.metrics.counts.timeouts,
            sink.len()
        ),
    )
}

fn determinism() -> Outcome {
    let (scenes, mut config) = noisy_fixture(3, 5);
    config.predictors = ["cvm", "noisy_cvm", "prob_cvm", "bridge:inproc:noisy_cvm"]
        .iter()
        .map(|p| p.parse().unwrap())
        .collect();
    config.mode = ExperimentMode::Repeatability;
    let result = harness::repeatability(&config, &scenes, 20).map_err(|e| e.to_string())?;
    let rows = repeatability_rows(&result);
    let zero = rows.iter().all(|r| {
        r.runs == 20
            && r.failed_runs == 0
            && r.min_dyn_ade.and_then(|m| m.std) == Some(0.0)
            && r.min_dyn_fde.and_then(|m| m.std) == Some(0.0)
    });
    let table = render(&result, ReportFormat::Text);
    let mut lines = table.lines();
    let h1: Vec<&str> = lines.next().unwrap_or_default().split("  ").filter(|s| !s.is_empty()).collect();
    let h2: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
    let layout = h1.first() == Some(&"Model")
        && h1.iter().filter(|s| s.trim() == "minDynADE (m)").count() == 2
        && h1.iter().filter(|s| s.trim() == "minDynFDE (m)").count() == 2
        && h2.starts_with(&["Mean", "Std", "Mean", "Std"]);
    check(
        zero && layout && rows.len() == 4,
        format!("20 runs x {} predictors, every std exactly 0, Mean/Std layout", rows.len()),
        format!("std all zero: {zero}, layout ok: {layout}\n{table}"),
    )
}

fn h_ablation() -> Outcome {
    let (scenes, mut config) = noisy_fixture(6, 9);
    config.predictors = ["cvm", "bridge:inproc:noisy_cvm", "bridge:inproc:cvm"]
        .iter()
        .map(|p| p.parse().unwrap())
        .collect();
    config.h_values = vec![2, 4, 8];
    config.k = 5;
    let result = harness::ablate_history(&config, &scenes).map_err(|e| e.to_string())?;
    let bits = |h: usize| -> Option<Vec<(u64, u64)>> {
        let d = result.cell("cvm", 1, h, 0)?.dataset.as_ref()?;
        let mut v = vec![(d.min_dyn_ade?.to_bits(), d.min_dyn_fde?.to_bits())];
        v.extend(d.scenes.iter().map(|s| (s.min_dyn_ade.unwrap_or(-1.0).to_bits(), s.min_dyn_fde.unwrap_or(-1.0).to_bits())));
        Some(v)
    };
    let invariant = bits(2).is_some() && bits(2) == bits(4) && bits(4) == bits(8);
    let mut wire = Vec::new();
    for cell in result.cells.iter().filter(|c| c.key.predictor.is_bridge()) {
        let w = cell.wire.ok_or("bridged cell without wire summary")?;
        if !cell.is_ok() || w.requests == 0 || w.max_history > cell.key.h {
            return Err(format!("{} H={}: {:?} {:?}", cell.key.predictor, cell.key.h, cell.status, w));
        }
        wire.push(format!("H={}:{}", cell.key.h, w.max_history));
    }
    check(
        invariant && wire.len() == 6,
        format!("cvm bit-equal over H=2,4,8; longest wire history per bridged cell {}", wire.join(" ")),
        format!("cvm invariant: {invariant}, bridged cells checked: {}", wire.len()),
    )
}

fn aggregation_oracle() -> Outcome {
    let scenes = generate_dataset(&WalkerConfig::standard(12, 90), 4242, 5).unwrap();
    let observation = ObservationModel {
        noise_sigma: 0.1,
        dropout_prob: 0.1,
        seed: 8,
        ..ObservationModel::perfect()
    };
    let config = ReplayConfig { k: 5, f: 8, ..ReplayConfig::default() };
    let mut streamed = Vec::new();
    let mut flat: Vec<f64> = Vec::new();
    let mut flat_f: Vec<f64> = Vec::new();
    for (i, scene) in scenes.iter().enumerate() {
        let mut stored: Vec<InstantError> = Vec::new();
        let r = run_scene(scene, &observation, &TrackerConfig::default(), &mut NoisyCvm::new(0.05, 0.3, i as u64), &config, &mut stored)
            .map_err(|e| e.to_string())?;
        streamed.push(r.metrics);
        let mut per_agent: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for e in &stored {
            let a = per_agent.entry(e.agent_id.as_str()).or_default();
            a.0.push(e.ade.iter().cloned().fold(f64::INFINITY, f64::min));
            a.1.push(e.fde.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let agents_a: Vec<f64> = per_agent.values().map(|(a, _)| mean(a)).collect();
        let agents_f: Vec<f64> = per_agent.values().map(|(_, f)| mean(f)).collect();
        flat.push(mean(&agents_a));
        flat_f.push(mean(&agents_f));
    }
    let dataset = aggregate_dataset(streamed.clone());
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut worst = 0.0f64;
    for (s, (a, f)) in streamed.iter().zip(flat.iter().zip(&flat_f)) {
        worst = worst
            .max((s.min_dyn_ade.ok_or("scene without ADE")? - a).abs())
            .max((s.min_dyn_fde.ok_or("scene without FDE")? - f).abs());
    }
    worst = worst
        .max((dataset.min_dyn_ade.unwrap() - mean(&flat)).abs())
        .max((dataset.min_dyn_fde.unwrap() - mean(&flat_f)).abs());
    check(
        worst <= 1e-12,
        format!("5 scenes, max |streamed - flat| = {worst:.1e}"),
        format!("max |streamed - flat| = {worst:e} (tol 1e-12)"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric oracle", metric_oracle),
        ("cvm exactness", cvm_exactness),
        ("best-of-n monotonicity", best_of_n),
        ("k=1 cvm vs noisy_cvm", k1_cvm_vs_noisy),
        ("timeout semantics", timeout_semantics),
        ("determinism / repeatability", determinism),
        ("h-ablation", h_ablation),
        ("aggregation oracle", aggregation_oracle),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
