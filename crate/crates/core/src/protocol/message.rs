//! Versioned JSON wire envelope.
//!
//! Every frame is one JSON object:
//!
//! ```json
//! {"v":1,"kind":"ping","seq":0,"payload":{"nonce":7}}
//! ```
//!
//! `session` and `sender` are optional and omitted when absent. `seq` is 0
//! until the server stamps a delta.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::delta::StateDelta;
use super::types::{ChannelId, ClientId, ClientRole, SessionCode, SessionState};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    CreateSession,
    SessionCreated,
    JoinRequest,
    JoinAck,
    JoinReject,
    Delta,
    FullSync,
    Ping,
    Pong,
    Leave,
    Error,
}

impl MessageKind {
    pub const ALL: [MessageKind; 11] = [
        MessageKind::CreateSession,
        MessageKind::SessionCreated,
        MessageKind::JoinRequest,
        MessageKind::JoinAck,
        MessageKind::JoinReject,
        MessageKind::Delta,
        MessageKind::FullSync,
        MessageKind::Ping,
        MessageKind::Pong,
        MessageKind::Leave,
        MessageKind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::CreateSession => "create_session",
            MessageKind::SessionCreated => "session_created",
            MessageKind::JoinRequest => "join_request",
            MessageKind::JoinAck => "join_ack",
            MessageKind::JoinReject => "join_reject",
            MessageKind::Delta => "delta",
            MessageKind::FullSync => "full_sync",
            MessageKind::Ping => "ping",
            MessageKind::Pong => "pong",
            MessageKind::Leave => "leave",
            MessageKind::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownCode,
    SessionFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotMember,
    InvalidUpdate,
    BadMessage,
    UnexpectedKind,
    SessionsExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub id: ChannelId,
    pub name: String,
}

/// Per-entity statistics shipped to clients at join.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogEntry {
    pub id: String,
    pub label: String,
    pub volume_um3: f64,
    pub centroid_um: [f64; 3],
    pub aabb_min: [f64; 3],
    pub aabb_max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneCatalog {
    pub name: String,
    pub meters_per_micrometer: f64,
    pub channels: Vec<ChannelInfo>,
    pub entities: Vec<CatalogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JoinRequest {
    pub role: ClientRole,
    /// Present when a client rejoins after losing its connection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<ClientId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JoinAck {
    pub client_id: ClientId,
    pub code: SessionCode,
    pub seq: u64,
    pub state: SessionState,
    pub catalog_checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<SceneCatalog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSync {
    pub seq: u64,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    /// Offending state paths, for `invalid_update`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    CreateSession,
    SessionCreated { code: SessionCode },
    JoinRequest(JoinRequest),
    JoinAck(Box<JoinAck>),
    JoinReject { reason: RejectReason },
    Delta(StateDelta),
    FullSync(Box<FullSync>),
    Ping { nonce: u64 },
    Pong { nonce: u64 },
    Leave,
    Error(ErrorPayload),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::CreateSession => MessageKind::CreateSession,
            Payload::SessionCreated { .. } => MessageKind::SessionCreated,
            Payload::JoinRequest(_) => MessageKind::JoinRequest,
            Payload::JoinAck(_) => MessageKind::JoinAck,
            Payload::JoinReject { .. } => MessageKind::JoinReject,
            Payload::Delta(_) => MessageKind::Delta,
            Payload::FullSync(_) => MessageKind::FullSync,
            Payload::Ping { .. } => MessageKind::Ping,
            Payload::Pong { .. } => MessageKind::Pong,
            Payload::Leave => MessageKind::Leave,
            Payload::Error(_) => MessageKind::Error,
        }
    }

    fn to_json(&self) -> Value {
        use serde_json::json;
        let to = |v: &dyn erased::Ser| v.value();
        match self {
            Payload::CreateSession | Payload::Leave => json!({}),
            Payload::SessionCreated { code } => json!({ "code": code }),
            Payload::JoinRequest(r) => to(r),
            Payload::JoinAck(a) => to(a.as_ref()),
            Payload::JoinReject { reason } => json!({ "reason": reason }),
            Payload::Delta(d) => to(d),
            Payload::FullSync(s) => to(s.as_ref()),
            Payload::Ping { nonce } | Payload::Pong { nonce } => json!({ "nonce": nonce }),
            Payload::Error(e) => to(e),
        }
    }

    fn from_json(kind: MessageKind, value: Value) -> Result<Payload, DecodeError> {
        #[derive(Deserialize)]
        struct Code {
            code: SessionCode,
        }
        #[derive(Deserialize)]
        struct Reason {
            reason: RejectReason,
        }
        #[derive(Deserialize)]
        struct Nonce {
            nonce: u64,
        }
        #[derive(Deserialize)]
        struct Empty {}

        if !value.is_object() {
            return Err(DecodeError::Schema(format!("{kind} payload must be an object")));
        }
        Ok(match kind {
            MessageKind::CreateSession => {
                typed::<Empty>(kind, value)?;
                Payload::CreateSession
            }
            MessageKind::Leave => {
                typed::<Empty>(kind, value)?;
                Payload::Leave
            }
            MessageKind::SessionCreated => Payload::SessionCreated { code: typed::<Code>(kind, value)?.code },
            MessageKind::JoinRequest => Payload::JoinRequest(typed(kind, value)?),
            MessageKind::JoinAck => Payload::JoinAck(Box::new(typed(kind, value)?)),
            MessageKind::JoinReject => Payload::JoinReject { reason: typed::<Reason>(kind, value)?.reason },
            MessageKind::Delta => Payload::Delta(typed(kind, value)?),
            MessageKind::FullSync => Payload::FullSync(Box::new(typed(kind, value)?)),
            MessageKind::Ping => Payload::Ping { nonce: typed::<Nonce>(kind, value)?.nonce },
            MessageKind::Pong => Payload::Pong { nonce: typed::<Nonce>(kind, value)?.nonce },
            MessageKind::Error => Payload::Error(typed(kind, value)?),
        })
    }
}

fn typed<T: DeserializeOwned>(kind: MessageKind, value: Value) -> Result<T, DecodeError> {
    serde_json::from_value(value).map_err(|e| DecodeError::Schema(format!("{kind} payload: {e}")))
}

mod erased {
    use serde::Serialize;
    use serde_json::Value;

    pub trait Ser {
        fn value(&self) -> Value;
    }

    impl<T: Serialize> Ser for T {
        fn value(&self) -> Value {
            serde_json::to_value(self).expect("payload serializes to JSON")
        }
    }
}

/// One wire message. The protocol version and kind are implied by the
/// payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub session: Option<SessionCode>,
    pub sender: Option<ClientId>,
    pub seq: u64,
    pub payload: Payload,
}

impl Message {
    pub fn new(payload: Payload) -> Self {
        Message { session: None, sender: None, seq: 0, payload }
    }

    pub fn in_session(mut self, code: SessionCode) -> Self {
        self.session = Some(code);
        self
    }

    pub fn from_sender(mut self, sender: ClientId) -> Self {
        self.sender = Some(sender);
        self
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("v".into(), PROTOCOL_VERSION.into());
        obj.insert("kind".into(), self.kind().as_str().into());
        if let Some(code) = self.session {
            obj.insert("session".into(), code.to_string().into());
        }
        if let Some(sender) = self.sender {
            obj.insert("sender".into(), sender.to_string().into());
        }
        obj.insert("seq".into(), self.seq.into());
        obj.insert("payload".into(), self.payload.to_json());
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("unsupported protocol version {0}")]
    BadVersion(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

/// Serializes `msg` as the UTF-8 text of one JSON object.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    encode_text(msg).into_bytes()
}

pub fn encode_text(msg: &Message) -> String {
    msg.to_json().to_string()
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, DecodeError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::Schema("message must be a JSON object".into()));
    };

    match obj.get("v") {
        None => return Err(DecodeError::Schema("missing field `v`".into())),
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(DecodeError::BadVersion(v.to_string())),
    }

    let kind = match obj.get("kind") {
        Some(Value::String(s)) => MessageKind::parse(s).ok_or_else(|| DecodeError::UnknownKind(s.clone()))?,
        Some(_) => return Err(DecodeError::Schema("`kind` must be a string".into())),
        None => return Err(DecodeError::Schema("missing field `kind`".into())),
    };

    let session = match obj.remove("session") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<SessionCode>(v)
                .map_err(|e| DecodeError::Schema(format!("session: {e}")))?,
        ),
    };
    let sender = match obj.remove("sender") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<ClientId>(v).map_err(|e| DecodeError::Schema(format!("sender: {e}")))?,
        ),
    };
    let seq = match obj.remove("seq") {
        None => 0,
        Some(v) => {
            v.as_u64().ok_or_else(|| DecodeError::Schema("`seq` must be an unsigned integer".into()))?
        }
    };
    let payload =
        obj.remove("payload").ok_or_else(|| DecodeError::Schema(format!("{kind} requires a payload")))?;
    let payload = Payload::from_json(kind, payload)?;

    Ok(Message { session, sender, seq, payload })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::delta::Update;

    #[test]
    fn ping_matches_documented_frame() {
        let bytes = encode_message(&Message::new(Payload::Ping { nonce: 7 }));
        let got: Value = serde_json::from_slice(&bytes).unwrap();
        let want: Value =
            serde_json::from_str(r#"{"v":1,"kind":"ping","seq":0,"payload":{"nonce":7}}"#).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn delta_round_trips() {
        let msg = Message::new(Payload::Delta(StateDelta::new(vec![Update::ChannelColor {
            channel: 3,
            color: [10, 20, 30],
        }])))
        .in_session("0420".parse().unwrap())
        .from_sender(ClientId(42))
        .with_seq(9);
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    #[test]
    fn full_sync_of_empty_state() {
        let msg =
            Message::new(Payload::FullSync(Box::new(FullSync { seq: 0, state: SessionState::default() })));
        let json: Value = serde_json::from_slice(&encode_message(&msg)).unwrap();
        let state = &json["payload"]["state"];
        assert_eq!(state["channels"], serde_json::json!({}));
        assert_eq!(state["measurements"], serde_json::json!({}));
        assert_eq!(state["selection"], serde_json::json!([]));
        assert_eq!(state["transform"], serde_json::json!({"t":[0.0,0.0,0.0],"q":[1.0,0.0,0.0,0.0],"s":1.0}));
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    #[test]
    fn decode_error_classes() {
        assert!(matches!(decode_message(b"not json"), Err(DecodeError::Malformed(_))));
        assert!(matches!(
            decode_message(br#"{"v":2,"kind":"ping","seq":0,"payload":{"nonce":1}}"#),
            Err(DecodeError::BadVersion(_))
        ));
        assert!(matches!(
            decode_message(br#"{"v":1,"kind":"teleport","seq":0,"payload":{}}"#),
            Err(DecodeError::UnknownKind(_))
        ));
        assert!(matches!(
            decode_message(br#"{"v":1,"kind":"ping","seq":0,"payload":{}}"#),
            Err(DecodeError::Schema(_))
        ));
        assert!(matches!(
            decode_message(br#"{"v":1,"kind":"ping","seq":-1,"payload":{"nonce":1}}"#),
            Err(DecodeError::Schema(_))
        ));
        assert!(matches!(
            decode_message(br#"{"v":1,"kind":"delta","seq":0,"payload":{"updates":[{"path":"channels.0.color","value":null}]}}"#),
            Err(DecodeError::Schema(_))
        ));
        assert!(matches!(
            decode_message(
                br#"{"v":1,"kind":"join_request","session":"42","seq":0,"payload":{"role":"headset"}}"#
            ),
            Err(DecodeError::Schema(_))
        ));
        assert!(matches!(decode_message(b"[1,2,3]"), Err(DecodeError::Schema(_))));
    }
}
