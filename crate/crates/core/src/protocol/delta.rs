//! Field paths and typed updates.
//!
//! The path grammar is closed:
//!
//! ```text
//! channels.<int>.color | channels.<int>.window | channels.<int>.visible
//! channels.<int>.opacity | transform | selection | hover | measurements.<id>
//! ```
//!
//! Each [`Update`] pairs a path with a value of the type that path carries,
//! so an ill-typed update cannot be constructed. Only `hover` and
//! `measurements.<id>` accept a `null` tombstone.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use thiserror::Error;

use super::types::{Measurement, VolumeTransform};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatePath {
    ChannelColor(u32),
    ChannelWindow(u32),
    ChannelVisible(u32),
    ChannelOpacity(u32),
    Transform,
    Selection,
    Hover,
    Measurement(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("path {0:?} is not in the state path grammar")]
pub struct InvalidPath(pub String);

/// Measurement ids are path segments, so they are restricted to a dot-free
/// alphabet.
pub fn is_valid_measurement_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn parse_channel_index(s: &str) -> Option<u32> {
    let canonical =
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
    if canonical {
        s.parse().ok()
    } else {
        None
    }
}

impl StatePath {
    pub fn is_deletable(&self) -> bool {
        matches!(self, StatePath::Hover | StatePath::Measurement(_))
    }
}

impl fmt::Display for StatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePath::ChannelColor(c) => write!(f, "channels.{c}.color"),
            StatePath::ChannelWindow(c) => write!(f, "channels.{c}.window"),
            StatePath::ChannelVisible(c) => write!(f, "channels.{c}.visible"),
            StatePath::ChannelOpacity(c) => write!(f, "channels.{c}.opacity"),
            StatePath::Transform => f.write_str("transform"),
            StatePath::Selection => f.write_str("selection"),
            StatePath::Hover => f.write_str("hover"),
            StatePath::Measurement(id) => write!(f, "measurements.{id}"),
        }
    }
}

impl FromStr for StatePath {
    type Err = InvalidPath;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || InvalidPath(s.to_string());
        match s {
            "transform" => return Ok(StatePath::Transform),
            "selection" => return Ok(StatePath::Selection),
            "hover" => return Ok(StatePath::Hover),
            _ => {}
        }
        if let Some(id) = s.strip_prefix("measurements.") {
            return if is_valid_measurement_id(id) {
                Ok(StatePath::Measurement(id.to_string()))
            } else {
                Err(bad())
            };
        }
        let rest = s.strip_prefix("channels.").ok_or_else(bad)?;
        let (index, field) = rest.split_once('.').ok_or_else(bad)?;
        let channel = parse_channel_index(index).ok_or_else(bad)?;
        match field {
            "color" => Ok(StatePath::ChannelColor(channel)),
            "window" => Ok(StatePath::ChannelWindow(channel)),
            "visible" => Ok(StatePath::ChannelVisible(channel)),
            "opacity" => Ok(StatePath::ChannelOpacity(channel)),
            _ => Err(bad()),
        }
    }
}

/// One path/value write.
#[derive(Debug, Clone, PartialEq)]
pub enum Update {
    ChannelColor {
        channel: u32,
        color: [u8; 3],
    },
    ChannelWindow {
        channel: u32,
        lo: f64,
        hi: f64,
    },
    ChannelVisible {
        channel: u32,
        visible: bool,
    },
    ChannelOpacity {
        channel: u32,
        opacity: f64,
    },
    Transform(VolumeTransform),
    Selection(BTreeSet<String>),
    /// `None` clears the hover.
    Hover(Option<String>),
    /// `value: None` deletes the measurement.
    Measurement {
        id: String,
        value: Option<Measurement>,
    },
}

impl Update {
    pub fn path(&self) -> StatePath {
        match self {
            Update::ChannelColor { channel, .. } => StatePath::ChannelColor(*channel),
            Update::ChannelWindow { channel, .. } => StatePath::ChannelWindow(*channel),
            Update::ChannelVisible { channel, .. } => StatePath::ChannelVisible(*channel),
            Update::ChannelOpacity { channel, .. } => StatePath::ChannelOpacity(*channel),
            Update::Transform(_) => StatePath::Transform,
            Update::Selection(_) => StatePath::Selection,
            Update::Hover(_) => StatePath::Hover,
            Update::Measurement { id, .. } => StatePath::Measurement(id.clone()),
        }
    }

    pub fn value_json(&self) -> Value {
        match self {
            Update::ChannelColor { color, .. } => json!(color),
            Update::ChannelWindow { lo, hi, .. } => json!([lo, hi]),
            Update::ChannelVisible { visible, .. } => json!(visible),
            Update::ChannelOpacity { opacity, .. } => json!(opacity),
            Update::Transform(t) => serde_json::to_value(t).expect("transform serializes"),
            Update::Selection(s) => json!(s),
            Update::Hover(h) => json!(h),
            Update::Measurement { value, .. } => serde_json::to_value(value).expect("measurement serializes"),
        }
    }

    /// Builds the update a path/value pair denotes, checking the value type.
    pub fn from_path_value(path: StatePath, value: Value) -> Result<Update, String> {
        if value.is_null() && !path.is_deletable() {
            return Err(format!("{path}: null is only allowed on hover and measurements.*"));
        }
        let label = path.to_string();
        let typed = |e: serde_json::Error| format!("{label}: {e}");
        Ok(match path {
            StatePath::ChannelColor(channel) => {
                Update::ChannelColor { channel, color: serde_json::from_value(value).map_err(typed)? }
            }
            StatePath::ChannelWindow(channel) => {
                let [lo, hi]: [f64; 2] = serde_json::from_value(value).map_err(typed)?;
                Update::ChannelWindow { channel, lo, hi }
            }
            StatePath::ChannelVisible(channel) => {
                Update::ChannelVisible { channel, visible: serde_json::from_value(value).map_err(typed)? }
            }
            StatePath::ChannelOpacity(channel) => {
                Update::ChannelOpacity { channel, opacity: serde_json::from_value(value).map_err(typed)? }
            }
            StatePath::Transform => Update::Transform(serde_json::from_value(value).map_err(typed)?),
            StatePath::Selection => Update::Selection(serde_json::from_value(value).map_err(typed)?),
            StatePath::Hover => Update::Hover(serde_json::from_value(value).map_err(typed)?),
            StatePath::Measurement(id) => {
                Update::Measurement { value: serde_json::from_value(value).map_err(typed)?, id }
            }
        })
    }
}

impl Serialize for Update {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        json!({ "path": self.path().to_string(), "value": self.value_json() }).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Update {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            path: String,
            value: Value,
        }
        let raw = Raw::deserialize(deserializer)?;
        let path: StatePath = raw.path.parse().map_err(D::Error::custom)?;
        Update::from_path_value(path, raw.value).map_err(D::Error::custom)
    }
}

/// Ordered list of updates; the unit of synchronization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateDelta {
    pub updates: Vec<Update>,
}

impl StateDelta {
    pub fn new(updates: Vec<Update>) -> Self {
        StateDelta { updates }
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn push(&mut self, update: Update) {
        self.updates.push(update);
    }
}
