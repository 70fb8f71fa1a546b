//! Value types that make up the synchronized session state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Four-digit decimal join code, `"0000"` through `"9999"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionCode(u16);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("session code must be exactly four decimal digits, got {0:?}")]
pub struct InvalidSessionCode(pub String);

impl SessionCode {
    pub const SPACE: u16 = 10_000;

    pub fn from_index(index: u16) -> Option<Self> {
        (index < Self::SPACE).then_some(SessionCode(index))
    }

    pub fn index(self) -> u16 {
        self.0
    }
}

impl fmt::Display for SessionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}

impl FromStr for SessionCode {
    type Err = InvalidSessionCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidSessionCode(s.to_string()));
        }
        Ok(SessionCode(s.parse().expect("four ascii digits")))
    }
}

impl Serialize for SessionCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SessionCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque 128-bit client identifier, rendered as 32 lowercase hex digits.
///
/// Ordering of the integer matches lexicographic ordering of the fixed-width
/// hex rendering, which is what tie-breaking between equal sequence numbers
/// relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClientId(pub u128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("client id must be 32 lowercase hex digits, got {0:?}")]
pub struct InvalidClientId(pub String);

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for ClientId {
    type Err = InvalidClientId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ok = s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !ok {
            return Err(InvalidClientId(s.to_string()));
        }
        u128::from_str_radix(s, 16).map(ClientId).map_err(|_| InvalidClientId(s.to_string()))
    }
}

impl Serialize for ClientId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClientId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientRole {
    Display2d,
    Headset,
    Simulator,
    Observer,
}

pub type ChannelId = u32;

/// Display settings for one image channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelState {
    pub channel_id: ChannelId,
    pub color: [u8; 3],
    pub window_lo: f64,
    pub window_hi: f64,
    pub visible: bool,
    pub opacity: f64,
}

impl ChannelState {
    /// Settings a channel takes when one of its fields is first written.
    pub fn with_defaults(channel_id: ChannelId) -> Self {
        ChannelState {
            channel_id,
            color: [255, 255, 255],
            window_lo: 0.0,
            window_hi: 1.0,
            visible: true,
            opacity: 1.0,
        }
    }
}

/// Placement of the volume in headset world space.
///
/// Maps a scene point `x` (micrometers) to world meters as
/// `translation + rotation * (scale * base * x)` where `base` is the
/// scene's meters-per-micrometer display scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeTransform {
    #[serde(rename = "t")]
    pub translation: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`.
    #[serde(rename = "q")]
    pub rotation: [f64; 4],
    #[serde(rename = "s")]
    pub scale: f64,
}

impl VolumeTransform {
    pub const MIN_SCALE: f64 = 1e-4;
    pub const MAX_SCALE: f64 = 1e4;
    pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

    pub const IDENTITY: VolumeTransform =
        VolumeTransform { translation: [0.0; 3], rotation: [1.0, 0.0, 0.0, 0.0], scale: 1.0 };
}

impl Default for VolumeTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// A measurement tape between two scene points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Measurement {
    pub measurement_id: String,
    pub endpoint_a: [f64; 3],
    pub endpoint_b: [f64; 3],
    pub length_um: f64,
    pub finalized: bool,
}

impl Measurement {
    pub fn new(id: impl Into<String>, a: [f64; 3], b: [f64; 3], finalized: bool) -> Self {
        Measurement {
            measurement_id: id.into(),
            endpoint_a: a,
            endpoint_b: b,
            length_um: euclidean(a, b),
            finalized,
        }
    }
}

pub(crate) fn euclidean(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Last accepted write on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqStamp {
    pub seq: u64,
    pub sender: ClientId,
}

impl SeqStamp {
    /// Whether a write stamped `(seq, sender)` supersedes this one.
    pub fn is_superseded_by(&self, seq: u64, sender: ClientId) -> bool {
        (seq, sender) > (self.seq, self.sender)
    }
}

/// Authoritative visualization state of one session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    #[serde(with = "channel_map")]
    pub channels: BTreeMap<ChannelId, ChannelState>,
    pub transform: VolumeTransform,
    pub selection: BTreeSet<String>,
    pub hover: Option<String>,
    pub measurements: BTreeMap<String, Measurement>,
    #[serde(default)]
    pub last_seq: BTreeMap<String, SeqStamp>,
}

/// JSON object keys are strings; channel ids are written as decimal keys.
mod channel_map {
    use super::ChannelState;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<u32, ChannelState>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &ChannelState> = map.iter().map(|(k, v)| (k.to_string(), v)).collect();
        keyed.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<u32, ChannelState>, D::Error> {
        let keyed = BTreeMap::<String, ChannelState>::deserialize(deserializer)?;
        keyed
            .into_iter()
            .map(|(k, v)| {
                let id: u32 = k.parse().map_err(|_| D::Error::custom(format!("bad channel key {k:?}")))?;
                Ok((id, v))
            })
            .collect()
    }
}
