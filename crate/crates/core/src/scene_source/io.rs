use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::{resample_to_grid, AgentId, Scene, SceneError, Track, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// Whitespace separated `frame_id ped_id x y` lines.
    EthUcyTxt,
    /// One scene object per line, the harness interchange format.
    SceneJsonl,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eth_ucy" | "eth_ucy_txt" => Ok(Self::EthUcyTxt),
            "scene_jsonl" | "jsonl" => Ok(Self::SceneJsonl),
            other => Err(format!("unknown format `{other}` (eth_ucy, scene_jsonl)")),
        }
    }
}

/// How raw ETH/UCY frame ids become ticks.
///
/// The annotation interval (GCD of consecutive per-agent frame differences)
/// is detected from the file; `stride` annotation intervals make one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EthUcyOptions {
    pub stride: u32,
    pub delta_t: f64,
}

impl Default for EthUcyOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            delta_t: 0.4,
        }
    }
}

pub fn load_trajectory_log(
    path: &Path,
    format: LogFormat,
    options: EthUcyOptions,
) -> Result<Vec<Scene>, SceneError> {
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_owned(),
        source,
    })?;
    match format {
        LogFormat::EthUcyTxt => {
            let scene_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".to_owned());
            parse_eth_ucy(&text, path, &scene_id, options).map(|s| vec![s])
        }
        LogFormat::SceneJsonl => parse_scene_jsonl(&text, path),
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn parse_eth_ucy(
    text: &str,
    path: &Path,
    scene_id: &str,
    options: EthUcyOptions,
) -> Result<Scene, SceneError> {
    let parse_err = |line: usize, message: String| SceneError::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    if options.stride == 0 {
        return Err(SceneError::InvalidConfig("stride must be >= 1".into()));
    }

    // ped id -> frame -> (line, position)
    let mut by_agent: BTreeMap<String, BTreeMap<u64, (usize, Vec2)>> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                line_no,
                format!("expected 4 fields `frame_id ped_id x y`, found {}", fields.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64, SceneError> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("invalid {name} `{}`", fields[i])))
        };
        let frame = num(0, "frame_id")?;
        if frame < 0.0 || frame.fract() != 0.0 {
            return Err(parse_err(line_no, format!("frame_id must be a non-negative integer, got {frame}")));
        }
        let ped = num(1, "ped_id")?;
        let pos = Vec2::new(num(2, "x")?, num(3, "y")?);
        let ped_key = if ped.fract() == 0.0 {
            format!("{}", ped as i64)
        } else {
            fields[1].to_owned()
        };
        let frames = by_agent.entry(ped_key.clone()).or_default();
        if frames.insert(frame as u64, (line_no, pos)).is_some() {
            return Err(parse_err(
                line_no,
                format!("duplicate entry for pedestrian {ped_key} at frame {frame}"),
            ));
        }
    }
    if by_agent.is_empty() {
        return Err(SceneError::EmptyDataset(path.to_owned()));
    }

    let first_frame = by_agent
        .values()
        .filter_map(|f| f.keys().next().copied())
        .min()
        .unwrap_or(0);
    let step = by_agent
        .values()
        .flat_map(|f| {
            let keys: Vec<u64> = f.keys().copied().collect();
            keys.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>()
        })
        .fold(0, gcd)
        .max(1);
    let frames_per_tick = (step * options.stride as u64) as f64;

    let mut tracks = Vec::with_capacity(by_agent.len());
    for (ped, frames) in by_agent {
        let raw: Vec<(f64, Vec2)> = frames
            .iter()
            .map(|(&frame, &(_, pos))| {
                ((frame - first_frame) as f64 / frames_per_tick * options.delta_t, pos)
            })
            .collect();
        let agent = AgentId::new(ped);
        if raw.len() == 1 {
            let tick_f = raw[0].0 / options.delta_t;
            if (tick_f - tick_f.round()).abs() < 1e-9 {
                tracks.push(Track::from_points(
                    agent,
                    vec![TrackPoint::new(tick_f.round() as u64, raw[0].1)],
                )?);
            }
            continue;
        }
        match resample_to_grid(agent, &raw, options.delta_t) {
            Ok(track) => tracks.push(track),
            // Too short to reach a grid point after striding.
            Err(SceneError::InsufficientData(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Scene::new(scene_id, options.delta_t, tracks, None)
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneRecord {
    scene_id: String,
    delta_t: f64,
    agents: Vec<AgentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_ticks: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentRecord {
    id: String,
    start_tick: u64,
    xy: Vec<Vec2>,
}

pub fn parse_scene_jsonl(text: &str, path: &Path) -> Result<Vec<Scene>, SceneError> {
    let mut scenes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| SceneError::Parse {
            path: PathBuf::from(path),
            line: line_no,
            message,
        };
        let record: SceneRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let agents = record
            .agents
            .into_iter()
            .map(|a| Track::contiguous(AgentId(a.id), a.start_tick, a.xy))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(e.to_string()))?;
        let scene = Scene::new(record.scene_id, record.delta_t, agents, record.duration_ticks)
            .map_err(|e| parse_err(e.to_string()))?;
        scenes.push(scene);
    }
    if scenes.is_empty() {
        return Err(SceneError::EmptyDataset(path.to_owned()));
    }
    Ok(scenes)
}

/// Writes scenes as `scene_jsonl`, one object per line.
pub fn write_scene_jsonl<W: Write>(scenes: &[Scene], mut out: W) -> std::io::Result<()> {
    for scene in scenes {
        let record = SceneRecord {
            scene_id: scene.scene_id.clone(),
            delta_t: scene.delta_t,
            agents: scene
                .agents()
                .iter()
                .map(|t| AgentRecord {
                    id: t.agent_id.0.clone(),
                    start_tick: t.start_tick(),
                    xy: t.points().iter().map(|p| p.pos).collect(),
                })
                .collect(),
            duration_ticks: Some(scene.duration_ticks),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
