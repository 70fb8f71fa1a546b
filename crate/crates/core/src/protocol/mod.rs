//! State model, wire schema and merge semantics shared by the server and
//! every client.

mod delta;
mod merge;
mod message;
mod types;

pub use delta::{is_valid_measurement_id, InvalidPath, StateDelta, StatePath, Update};
pub use merge::{
    diff_states, validate_state, validate_update, ApplyReport, Rule, Violation, LENGTH_REL_TOLERANCE,
};
pub use message::{
    decode_message, encode_message, encode_text, CatalogEntry, ChannelInfo, DecodeError, ErrorCode,
    ErrorPayload, FullSync, JoinAck, JoinRequest, Message, MessageKind, Payload, RejectReason, SceneCatalog,
    PROTOCOL_VERSION,
};
pub use types::{
    ChannelId, ChannelState, ClientId, ClientRole, InvalidClientId, InvalidSessionCode, Measurement,
    SeqStamp, SessionCode, SessionState, VolumeTransform,
};
