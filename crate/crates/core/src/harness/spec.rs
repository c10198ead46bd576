//! Predictor selection strings, as used in configs and on the command line.
//!
//! ```text
//! cvm
//! noisy_cvm                      global sigmas
//! noisy_cvm:sigma_angle=0.3      per-predictor override
//! prob_cvm:sigma_speed=0.1,pool=20
//! oracle                         reads ground truth; a sanity ceiling
//! sleepy_cvm:delay_ms=600        cvm behind a fixed sleep
//! jittery_cvm:delay_ms=50,spread_ms=40
//! bridge:127.0.0.1:9000          tcp peer
//! bridge:python3 adapter.py      stdio peer, launched by the harness
//! bridge:inproc:cvm              in-process peer over pipes
//! ```

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorKind {
    Cvm,
    NoisyCvm(SamplerParams),
    ProbCvm(SamplerParams),
    Oracle,
    SleepyCvm { delay: Duration },
    JitteryCvm { delay: Duration, spread: Duration },
    Bridge(BridgeAddress),
}

/// Per-predictor overrides; `None` falls back to the experiment-wide value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerParams {
    pub sigma_speed: Option<f64>,
    pub sigma_angle: Option<f64>,
    pub pool: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeAddress {
    Tcp(String),
    Stdio(String),
    InProcess(Box<PredictorSpec>),
}

impl PredictorSpec {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn is_bridge(&self) -> bool {
        matches!(self.kind, PredictorKind::Bridge(_))
    }

    /// Whether cells must run alone because their timing is wall-clock bound.
    pub fn is_timed(&self) -> bool {
        matches!(
            self.kind,
            PredictorKind::SleepyCvm { .. } | PredictorKind::JitteryCvm { .. } | PredictorKind::Bridge(_)
        )
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl From<PredictorSpec> for String {
    fn from(spec: PredictorSpec) -> String {
        spec.text
    }
}

impl TryFrom<String> for PredictorSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let text = s.trim().to_owned();
        let (name, rest) = text.split_once(':').unwrap_or((&text, ""));
        if name == "bridge" {
            let address = parse_bridge(rest)?;
            return Ok(Self {
                kind: PredictorKind::Bridge(address),
                text,
            });
        }
        let params = Params::parse(rest)?;
        let kind = match name {
            "cvm" => PredictorKind::Cvm,
            "oracle" => PredictorKind::Oracle,
            "noisy_cvm" | "prob_cvm" => {
                let p = SamplerParams {
                    sigma_speed: params.f64("sigma_speed")?,
                    sigma_angle: params.f64("sigma_angle")?,
                    pool: params.f64("pool")?.map(|v| v as usize),
                };
                if name == "noisy_cvm" {
                    PredictorKind::NoisyCvm(p)
                } else {
                    PredictorKind::ProbCvm(p)
                }
            }
            "sleepy_cvm" => PredictorKind::SleepyCvm {
                delay: params.millis("delay_ms")?.unwrap_or(Duration::from_millis(600)),
            },
            "jittery_cvm" => PredictorKind::JitteryCvm {
                delay: params.millis("delay_ms")?.unwrap_or(Duration::from_millis(20)),
                spread: params.millis("spread_ms")?.unwrap_or(Duration::from_millis(20)),
            },
            other => return Err(format!("unknown predictor `{other}`")),
        };
        params.finish(name)?;
        Ok(Self { kind, text })
    }
}

fn parse_bridge(rest: &str) -> Result<BridgeAddress, String> {
    if rest.is_empty() {
        return Err("bridge needs an address: bridge:<host:port> or bridge:<command>".into());
    }
    if let Some(inner) = rest.strip_prefix("inproc:") {
        let inner: PredictorSpec = inner.parse()?;
        if inner.is_bridge() {
            return Err("an in-process peer cannot itself be a bridge".into());
        }
        return Ok(BridgeAddress::InProcess(Box::new(inner)));
    }
    if let Some(addr) = rest.strip_prefix("tcp:") {
        return Ok(BridgeAddress::Tcp(addr.to_owned()));
    }
    if let Some(cmd) = rest.strip_prefix("stdio:") {
        return Ok(BridgeAddress::Stdio(cmd.to_owned()));
    }
    let looks_like_socket = !rest.contains(char::is_whitespace)
        && rest
            .rsplit_once(':')
            .is_some_and(|(host, port)| !host.is_empty() && port.parse::<u16>().is_ok());
    Ok(if looks_like_socket {
        BridgeAddress::Tcp(rest.to_owned())
    } else {
        BridgeAddress::Stdio(rest.to_owned())
    })
}

struct Params(Vec<(String, String)>);

impl Params {
    fn parse(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for pair in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{pair}`"))?;
            out.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(Self(out))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        let Some(entry) = self.0.iter().find(|e| e.0 == key) else {
            return Ok(None);
        };
        entry
            .1
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(Some)
            .ok_or_else(|| format!("`{key}` must be a non-negative number, got `{}`", entry.1))
    }

    fn millis(&self, key: &str) -> Result<Option<Duration>, String> {
        Ok(self.f64(key)?.map(|ms| Duration::from_secs_f64(ms / 1000.0)))
    }

    fn finish(self, name: &str) -> Result<(), String> {
        let known: &[&str] = match name {
            "noisy_cvm" | "prob_cvm" => &["sigma_speed", "sigma_angle", "pool"],
            "sleepy_cvm" => &["delay_ms"],
            "jittery_cvm" => &["delay_ms", "spread_ms"],
            _ => &[],
        };
        match self.0.iter().find(|e| !known.contains(&e.0.as_str())) {
            Some(e) => Err(format!("`{name}` does not take `{}`", e.0)),
            None => Ok(()),
        }
    }
}
