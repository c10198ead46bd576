//! Line-delimited JSON messages. One message per line, UTF-8.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

pub const PROTOCOL_VERSION: u32 = 1;

/// Harness to peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HarnessMessage {
    Hello(Hello),
    Predict(PredictMessage),
}

/// Peer to harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PeerMessage {
    Capabilities(Capabilities),
    Prediction(PredictionMessage),
    Error(ErrorMessage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub version: u32,
    pub delta_t: f64,
    pub h: usize,
    pub f: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub model: String,
    pub min_history: usize,
    pub max_k: usize,
    pub supports_probabilities: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictMessage {
    pub id: u64,
    pub tick: u64,
    pub agents: Vec<AgentHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentHistory {
    pub id: String,
    pub history: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMessage {
    pub id: u64,
    pub agents: Vec<AgentPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrediction {
    pub id: String,
    pub candidates: Vec<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    #[serde(default)]
    pub id: Option<u64>,
    pub message: String,
}

/// Serializes to a single line, without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_shapes() {
        let hello = HarnessMessage::Hello(Hello {
            version: 1,
            delta_t: 0.4,
            h: 8,
            f: 12,
            k: 5,
        });
        assert_eq!(
            encode(&hello),
            r#"{"type":"hello","version":1,"delta_t":0.4,"h":8,"f":12,"k":5}"#
        );
        let caps: PeerMessage = serde_json::from_str(
            r#"{"type":"capabilities","model":"m","min_history":2,"max_k":20,"supports_probabilities":false}"#,
        )
        .unwrap();
        assert!(matches!(caps, PeerMessage::Capabilities(Capabilities { max_k: 20, version: None, .. })));
        let predict = HarnessMessage::Predict(PredictMessage {
            id: 17,
            tick: 42,
            agents: vec![AgentHistory {
                id: "a1".into(),
                history: vec![Vec2::new(1.0, 2.5)],
            }],
        });
        assert_eq!(
            encode(&predict),
            r#"{"type":"predict","id":17,"tick":42,"agents":[{"id":"a1","history":[[1.0,2.5]]}]}"#
        );
        let pred: PeerMessage = serde_json::from_str(
            r#"{"type":"prediction","id":17,"agents":[{"id":"a1","candidates":[[[0,0],[1,1]]],"probs":[1.0]}]}"#,
        )
        .unwrap();
        let PeerMessage::Prediction(p) = pred else { panic!() };
        assert_eq!(p.agents[0].candidates[0][1], Vec2::new(1.0, 1.0));
        let err: PeerMessage = serde_json::from_str(r#"{"type":"error","id":17,"message":"oom"}"#).unwrap();
        assert!(matches!(err, PeerMessage::Error(ErrorMessage { id: Some(17), .. })));
    }

    #[test]
    fn rejects_unknown_types_and_missing_fields() {
        assert!(serde_json::from_str::<PeerMessage>(r#"{"type":"bogus"}"#).is_err());
        assert!(serde_json::from_str::<PeerMessage>(r#"{"type":"prediction","agents":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_exactly(x in -1.0e4f64..1.0e4, y in -1.0e4f64..1.0e4) {
            let msg = AgentHistory { id: "a".into(), history: vec![Vec2::new(x, y)] };
            let back: AgentHistory = serde_json::from_str(&encode(&msg)).unwrap();
            prop_assert_eq!(back.history[0], Vec2::new(x, y));
        }
    }
}
