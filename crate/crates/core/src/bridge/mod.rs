//! Client side of the out-of-process predictor protocol.
//!
//! The harness sends a `hello` with the replay parameters, receives the
//! peer's capabilities, then exchanges one `predict`/`prediction` pair per
//! tick. Request ids strictly increase; a reply whose id is older than the
//! current request is a late answer to an abandoned request and is dropped.

pub mod peer;
pub mod protocol;
mod transport;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::predictors::{
    CandidateTrajectory, Modality, PredictionRecord, PredictionRequest, Predictor, PredictorError,
};
use crate::replay::TimeMode;
use crate::scene_source::AgentId;

pub use protocol::{
    AgentHistory, AgentPrediction, Capabilities, ErrorMessage, HarnessMessage, Hello, PeerMessage,
    PredictMessage, PredictionMessage, PROTOCOL_VERSION,
};
pub use transport::{pipe, PipeReader, PipeWriter, Transport};
use transport::Incoming;

/// Time allowed for the peer to answer `hello`.
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

/// Upper bound on a virtual-mode round trip, which otherwise waits for
/// completion.
pub const VIRTUAL_HARD_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot reach peer: {0}")]
    Connect(String),
    #[error("peer disconnected: {0}")]
    Disconnected(String),
    #[error("peer did not answer the handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("protocol version mismatch: harness speaks {expected}, peer {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("peer capabilities do not fit the experiment: {0}")]
    Capability(String),
    #[error("malformed message from peer: {0}")]
    Malformed(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoundTripError {
    #[error("deadline exceeded")]
    Timeout,
    #[error("peer reported failure: {0}")]
    Peer(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Shared log of raw protocol lines.
pub type WireLog = Arc<Mutex<Vec<(Direction, String)>>>;

/// A handshaken connection to one peer.
pub struct BridgeEndpoint {
    transport: Transport,
    hello: Hello,
    capabilities: Capabilities,
    next_id: u64,
    wire_log: Option<WireLog>,
}

impl BridgeEndpoint {
    /// Sends `hello` and validates the returned capabilities against it.
    pub fn handshake(transport: Transport, hello: Hello) -> Result<Self, BridgeError> {
        Self::handshake_logged(transport, hello, None)
    }

    pub fn handshake_logged(
        mut transport: Transport,
        hello: Hello,
        wire_log: Option<WireLog>,
    ) -> Result<Self, BridgeError> {
        let line = protocol::encode(&HarnessMessage::Hello(hello.clone()));
        log_line(&wire_log, Direction::Sent, &line);
        transport.send_line(&line)?;
        let reply = match transport.recv_line(Some(HANDSHAKE_TIMEOUT)) {
            Incoming::Line(l) => l,
            Incoming::Timeout => return Err(BridgeError::HandshakeTimeout(HANDSHAKE_TIMEOUT)),
            Incoming::Closed => return Err(BridgeError::Disconnected("closed during handshake".into())),
        };
        log_line(&wire_log, Direction::Received, &reply);
        let capabilities = match parse_peer(&reply)? {
            PeerMessage::Capabilities(c) => c,
            PeerMessage::Error(e) => return Err(BridgeError::Connect(format!("peer refused: {}", e.message))),
            other => {
                return Err(BridgeError::Protocol(format!(
                    "expected capabilities, got {other:?}"
                )))
            }
        };
        if let Some(v) = capabilities.version {
            if v != PROTOCOL_VERSION {
                return Err(BridgeError::VersionMismatch {
                    expected: PROTOCOL_VERSION,
                    got: v,
                });
            }
        }
        if capabilities.max_k < hello.k {
            return Err(BridgeError::Capability(format!(
                "peer `{}` supports max_k={}, experiment requests k={}",
                capabilities.model, capabilities.max_k, hello.k
            )));
        }
        if capabilities.max_k == 0 {
            return Err(BridgeError::Capability("max_k must be >= 1".into()));
        }
        Ok(Self {
            transport,
            hello,
            capabilities,
            next_id: 1,
            wire_log,
        })
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    pub fn description(&self) -> &str {
        self.transport.description()
    }

    pub fn modality(&self) -> Modality {
        if self.capabilities.supports_probabilities {
            Modality::Probabilistic
        } else if self.capabilities.max_k == 1 {
            Modality::Deterministic
        } else {
            Modality::Stochastic
        }
    }

    /// Sends the eligible items of `request` and waits up to `wait` for the
    /// matching reply. `inference_elapsed` is measured here.
    pub fn round_trip(
        &mut self,
        request: &PredictionRequest,
        wait: Option<Duration>,
    ) -> Result<Vec<PredictionRecord>, RoundTripError> {
        let id = self.next_id;
        self.next_id += 1;
        let agents: Vec<AgentHistory> = request
            .eligible_items()
            .map(|item| AgentHistory {
                id: item.agent_id.0.clone(),
                history: item.history.iter().map(|p| p.pos).collect(),
            })
            .collect();
        let sent: BTreeSet<&str> = agents.iter().map(|a| a.id.as_str()).collect();
        let line = protocol::encode(&HarnessMessage::Predict(PredictMessage {
            id,
            tick: request.tick,
            agents: agents.clone(),
        }));
        let start = Instant::now();
        log_line(&self.wire_log, Direction::Sent, &line);
        self.transport.send_line(&line)?;

        loop {
            let remaining = wait.map(|w| w.saturating_sub(start.elapsed()));
            let reply = match self.transport.recv_line(remaining) {
                Incoming::Line(l) => l,
                Incoming::Timeout => return Err(RoundTripError::Timeout),
                Incoming::Closed => {
                    return Err(BridgeError::Disconnected(format!("while awaiting reply {id}")).into())
                }
            };
            log_line(&self.wire_log, Direction::Received, &reply);
            match parse_peer(&reply)? {
                PeerMessage::Prediction(p) if p.id < id => continue,
                PeerMessage::Error(ErrorMessage { id: Some(e), .. }) if e < id => continue,
                PeerMessage::Prediction(p) if p.id == id => {
                    let elapsed = start.elapsed();
                    return self
                        .convert(request, &sent, p, elapsed)
                        .map_err(RoundTripError::from);
                }
                PeerMessage::Error(e) if e.id.is_none() || e.id == Some(id) => {
                    return Err(RoundTripError::Peer(e.message))
                }
                other => {
                    return Err(BridgeError::Protocol(format!(
                        "unexpected reply while awaiting id {id}: {other:?}"
                    ))
                    .into())
                }
            }
        }
    }

    fn convert(
        &self,
        request: &PredictionRequest,
        sent: &BTreeSet<&str>,
        reply: PredictionMessage,
        elapsed: Duration,
    ) -> Result<Vec<PredictionRecord>, BridgeError> {
        let caps = &self.capabilities;
        let modality = self.modality();
        let mut seen = BTreeSet::new();
        let mut records = Vec::with_capacity(reply.agents.len());
        for agent in reply.agents {
            let schema = |m: String| BridgeError::Schema(format!("agent {}: {m}", agent.id));
            if !sent.contains(agent.id.as_str()) {
                return Err(schema("not part of the request".into()));
            }
            if !seen.insert(agent.id.clone()) {
                return Err(schema("answered twice".into()));
            }
            if agent.candidates.is_empty() {
                return Err(schema("no candidates".into()));
            }
            if agent.candidates.len() > caps.max_k {
                return Err(schema(format!(
                    "{} candidates exceed declared max_k {}",
                    agent.candidates.len(),
                    caps.max_k
                )));
            }
            if let Some(bad) = agent.candidates.iter().find(|c| c.len() != request.horizon_f) {
                return Err(schema(format!(
                    "candidate has {} points, horizon is {}",
                    bad.len(),
                    request.horizon_f
                )));
            }
            let probs = match (&agent.probs, caps.supports_probabilities) {
                (Some(p), true) if p.len() == agent.candidates.len() => Some(p.clone()),
                (Some(p), true) => {
                    return Err(schema(format!(
                        "{} probabilities for {} candidates",
                        p.len(),
                        agent.candidates.len()
                    )))
                }
                (None, true) => return Err(schema("probabilities missing".into())),
                (Some(_), false) => {
                    return Err(schema("probabilities sent but not declared".into()))
                }
                (None, false) => None,
            };
            let candidates = agent
                .candidates
                .into_iter()
                .enumerate()
                .map(|(i, points)| CandidateTrajectory {
                    points,
                    probability: probs.as_ref().map(|p| p[i]),
                })
                .collect();
            records.push(PredictionRecord {
                agent_id: AgentId(agent.id),
                issue_tick: request.tick,
                candidates,
                inference_elapsed: elapsed,
                modality,
            });
        }
        Ok(records)
    }
}

fn parse_peer(line: &str) -> Result<PeerMessage, BridgeError> {
    serde_json::from_str(line).map_err(|e| BridgeError::Malformed(format!("{e}: {line}")))
}

fn log_line(log: &Option<WireLog>, dir: Direction, line: &str) {
    if let Some(log) = log {
        log.lock().unwrap().push((dir, line.to_owned()));
    }
}

/// A [`BridgeEndpoint`] behind the [`Predictor`] contract.
pub struct BridgePredictor {
    endpoint: BridgeEndpoint,
    time_mode: TimeMode,
    name: String,
}

impl BridgePredictor {
    pub fn new(endpoint: BridgeEndpoint, time_mode: TimeMode) -> Self {
        let name = format!("bridge:{}", endpoint.capabilities().model);
        Self {
            endpoint,
            time_mode,
            name,
        }
    }

    pub fn endpoint(&self) -> &BridgeEndpoint {
        &self.endpoint
    }
}

impl Predictor for BridgePredictor {
    fn name(&self) -> &str {
        &self.name
    }

    fn modality(&self) -> Modality {
        self.endpoint.modality()
    }

    fn min_history(&self) -> usize {
        self.endpoint.capabilities().min_history.max(1)
    }

    fn enforces_deadline(&self) -> bool {
        true
    }

    fn predict(&mut self, request: &PredictionRequest) -> Result<Vec<PredictionRecord>, PredictorError> {
        let wait = match self.time_mode {
            TimeMode::Realtime => request.deadline,
            TimeMode::Virtual => VIRTUAL_HARD_TIMEOUT,
        };
        self.endpoint
            .round_trip(request, Some(wait))
            .map_err(|e| match e {
                RoundTripError::Timeout => PredictorError::Timeout,
                RoundTripError::Peer(m) => PredictorError::RequestFailed(m),
                RoundTripError::Bridge(b) => PredictorError::Fatal(b.to_string()),
            })
    }
}
