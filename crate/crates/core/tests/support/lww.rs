//! Reference merge: sort by stamp and overwrite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use tissuelink_core::protocol::{ClientId, SessionState, StateDelta, Update};

/// Sorts by stamp and writes every update unconditionally into a flat
/// path map, expanding a channel to its defaults the first time any of its
/// fields is written.
pub fn sort_and_replay(deltas: &[(u64, ClientId, StateDelta)]) -> BTreeMap<String, Value> {
    let mut sorted: Vec<_> = deltas.iter().collect();
    sorted.sort_by_key(|(seq, sender, _)| (*seq, *sender));
    let mut out = SessionState::default().to_paths();
    let mut channels = BTreeSet::new();
    for (_, _, delta) in sorted {
        let mut seen = BTreeSet::new();
        for u in &delta.updates {
            let path = u.path().to_string();
            if !seen.insert(path.clone()) {
                continue;
            }
            let channel = match u {
                Update::ChannelColor { channel, .. }
                | Update::ChannelWindow { channel, .. }
                | Update::ChannelVisible { channel, .. }
                | Update::ChannelOpacity { channel, .. } => Some(*channel),
                _ => None,
            };
            if let Some(c) = channel {
                if channels.insert(c) {
                    out.insert(format!("channels.{c}.color"), json!([255, 255, 255]));
                    out.insert(format!("channels.{c}.window"), json!([0.0, 1.0]));
                    out.insert(format!("channels.{c}.visible"), json!(true));
                    out.insert(format!("channels.{c}.opacity"), json!(1.0));
                }
            }
            let value = u.value_json();
            if path.starts_with("measurements.") && value.is_null() {
                out.remove(&path);
            } else {
                out.insert(path, value);
            }
        }
    }
    out
}
