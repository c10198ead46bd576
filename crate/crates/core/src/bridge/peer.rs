//! Peer side of the protocol, used by the `dynbench peer` subcommand, by
//! tests and as a reference for implementers in other languages.

use std::io::{self, BufRead, BufReader, Write};
use std::thread;
use std::time::Duration;

use super::protocol::{
    encode, AgentPrediction, Capabilities, ErrorMessage, HarnessMessage, Hello, PeerMessage,
    PredictMessage, PredictionMessage, PROTOCOL_VERSION,
};
use super::transport::{pipe, Transport};
use crate::predictors::{Modality, PredictionRequest, Predictor, RequestItem};
use crate::scene_source::{AgentId, TrackPoint};

/// A model served over the protocol.
pub trait PeerModel: Send {
    fn capabilities(&self, hello: &Hello) -> Capabilities;

    /// Predicts for the agents in `request`. Agents may be omitted.
    fn predict(&mut self, hello: &Hello, request: &PredictMessage) -> Result<Vec<AgentPrediction>, String>;
}

impl<M: PeerModel + ?Sized> PeerModel for Box<M> {
    fn capabilities(&self, hello: &Hello) -> Capabilities {
        (**self).capabilities(hello)
    }

    fn predict(&mut self, hello: &Hello, request: &PredictMessage) -> Result<Vec<AgentPrediction>, String> {
        (**self).predict(hello, request)
    }
}

/// Serves any in-process [`Predictor`].
///
/// Histories arrive without ticks, so they are assumed contiguous and to end
/// at the request tick.
pub struct PredictorPeer<P> {
    predictor: P,
    max_k: usize,
}

impl<P: Predictor> PredictorPeer<P> {
    pub fn new(predictor: P) -> Self {
        let max_k = if predictor.modality() == Modality::Deterministic { 1 } else { 64 };
        Self { predictor, max_k }
    }

    pub fn with_max_k(mut self, max_k: usize) -> Self {
        self.max_k = max_k;
        self
    }
}

impl<P: Predictor> PeerModel for PredictorPeer<P> {
    fn capabilities(&self, _hello: &Hello) -> Capabilities {
        Capabilities {
            model: self.predictor.name().to_owned(),
            min_history: self.predictor.min_history(),
            max_k: self.max_k,
            supports_probabilities: self.predictor.modality() == Modality::Probabilistic,
            version: Some(PROTOCOL_VERSION),
        }
    }

    fn predict(&mut self, hello: &Hello, request: &PredictMessage) -> Result<Vec<AgentPrediction>, String> {
        let items = request
            .agents
            .iter()
            .map(|a| {
                let first = request.tick + 1 - a.history.len().min(request.tick as usize + 1) as u64;
                RequestItem {
                    agent_id: AgentId(a.id.clone()),
                    history: a
                        .history
                        .iter()
                        .zip(first..)
                        .map(|(&pos, tick)| TrackPoint { tick, pos })
                        .collect(),
                    eligible: a.history.len() >= self.predictor.min_history(),
                }
            })
            .collect();
        let req = PredictionRequest {
            tick: request.tick,
            delta_t: hello.delta_t,
            items,
            horizon_f: hello.f,
            k: hello.k.min(self.max_k),
            deadline: Duration::MAX,
        };
        let records = self.predictor.predict(&req).map_err(|e| e.to_string())?;
        Ok(records
            .into_iter()
            .map(|r| {
                let probs = (r.modality == Modality::Probabilistic)
                    .then(|| r.candidates.iter().map(|c| c.probability.unwrap_or(0.0)).collect());
                AgentPrediction {
                    id: r.agent_id.0,
                    candidates: r.candidates.into_iter().map(|c| c.points).collect(),
                    probs,
                }
            })
            .collect())
    }
}

/// Wraps a model and sleeps before every prediction.
pub struct DelayedPeer<M> {
    inner: M,
    delay: Duration,
}

impl<M: PeerModel> DelayedPeer<M> {
    pub fn new(inner: M, delay: Duration) -> Self {
        Self { inner, delay }
    }
}

impl<M: PeerModel> PeerModel for DelayedPeer<M> {
    fn capabilities(&self, hello: &Hello) -> Capabilities {
        self.inner.capabilities(hello)
    }

    fn predict(&mut self, hello: &Hello, request: &PredictMessage) -> Result<Vec<AgentPrediction>, String> {
        thread::sleep(self.delay);
        self.inner.predict(hello, request)
    }
}

/// Runs the peer loop until the harness closes its end.
///
/// Malformed lines are answered with an `error` message and otherwise
/// ignored.
pub fn serve<R: BufRead, W: Write>(reader: R, mut writer: W, model: &mut dyn PeerModel) -> io::Result<()> {
    let mut hello: Option<Hello> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<HarnessMessage>(&line) {
            Err(e) => error(None, format!("malformed message: {e}")),
            Ok(HarnessMessage::Hello(h)) => {
                let caps = model.capabilities(&h);
                hello = Some(h);
                PeerMessage::Capabilities(caps)
            }
            Ok(HarnessMessage::Predict(p)) => match &hello {
                None => error(Some(p.id), "predict before hello".into()),
                Some(h) => match model.predict(h, &p) {
                    Ok(agents) => PeerMessage::Prediction(PredictionMessage { id: p.id, agents }),
                    Err(message) => error(Some(p.id), message),
                },
            },
        };
        writeln!(writer, "{}", encode(&reply))?;
        writer.flush()?;
    }
    Ok(())
}

fn error(id: Option<u64>, message: String) -> PeerMessage {
    PeerMessage::Error(ErrorMessage { id, message })
}

/// Runs `model` on a background thread connected by in-memory pipes.
pub fn spawn_in_process<M: PeerModel + 'static>(mut model: M) -> Transport {
    let (to_peer, peer_in) = pipe();
    let (peer_out, from_peer) = pipe();
    thread::spawn(move || {
        let _ = serve(BufReader::new(peer_in), peer_out, &mut model);
    });
    Transport::from_pipes(from_peer, to_peer, "in-process peer")
}
