//! Validation, last-writer-wins application and diffing of session state.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::delta::{is_valid_measurement_id, StateDelta, StatePath, Update};
use super::types::{
    euclidean, ChannelId, ChannelState, ClientId, Measurement, SeqStamp, SessionState, VolumeTransform,
};

/// Relative tolerance between a measurement's stored length and the
/// distance between its endpoints.
pub const LENGTH_REL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonFinite,
    WindowOrder,
    OpacityRange,
    QuaternionNorm,
    ScaleRange,
    MeasurementLength,
    MeasurementId,
    ChannelIdMismatch,
    EmptyEntityId,
    FinalizedImmutable,
    UnassignedSeq,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonFinite => "non_finite",
            Rule::WindowOrder => "window_order",
            Rule::OpacityRange => "opacity_range",
            Rule::QuaternionNorm => "quaternion_norm",
            Rule::ScaleRange => "scale_range",
            Rule::MeasurementLength => "measurement_length",
            Rule::MeasurementId => "measurement_id",
            Rule::ChannelIdMismatch => "channel_id_mismatch",
            Rule::EmptyEntityId => "empty_entity_id",
            Rule::FinalizedImmutable => "finalized_immutable",
            Rule::UnassignedSeq => "unassigned_seq",
        };
        f.write_str(s)
    }
}

/// A broken invariant, located by state path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: Rule,
}

impl Violation {
    pub fn new(path: impl ToString, rule: Rule) -> Self {
        Violation { path: path.to_string(), rule }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.path, self.rule)
    }
}

fn check_window(lo: f64, hi: f64) -> Result<(), Rule> {
    if !lo.is_finite() || !hi.is_finite() {
        Err(Rule::NonFinite)
    } else if lo > hi {
        Err(Rule::WindowOrder)
    } else {
        Ok(())
    }
}

fn check_opacity(opacity: f64) -> Result<(), Rule> {
    if !opacity.is_finite() {
        Err(Rule::NonFinite)
    } else if !(0.0..=1.0).contains(&opacity) {
        Err(Rule::OpacityRange)
    } else {
        Ok(())
    }
}

fn check_transform(t: &VolumeTransform) -> Result<(), Rule> {
    let all_finite = t.translation.iter().chain(&t.rotation).all(|v| v.is_finite()) && t.scale.is_finite();
    if !all_finite {
        return Err(Rule::NonFinite);
    }
    let norm = t.rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > VolumeTransform::QUAT_NORM_TOLERANCE {
        return Err(Rule::QuaternionNorm);
    }
    if !(VolumeTransform::MIN_SCALE..=VolumeTransform::MAX_SCALE).contains(&t.scale) {
        return Err(Rule::ScaleRange);
    }
    Ok(())
}

pub(crate) fn length_matches(m: &Measurement) -> bool {
    let dist = euclidean(m.endpoint_a, m.endpoint_b);
    let err = (m.length_um - dist).abs();
    err == 0.0 || err <= LENGTH_REL_TOLERANCE * dist.max(m.length_um.abs())
}

fn check_measurement(id: &str, m: &Measurement) -> Result<(), Rule> {
    if !is_valid_measurement_id(id) || m.measurement_id != id {
        return Err(Rule::MeasurementId);
    }
    let all_finite =
        m.endpoint_a.iter().chain(&m.endpoint_b).all(|v| v.is_finite()) && m.length_um.is_finite();
    if !all_finite {
        return Err(Rule::NonFinite);
    }
    if !length_matches(m) {
        return Err(Rule::MeasurementLength);
    }
    Ok(())
}

/// Checks the value an update carries. State-independent, so the outcome
/// never depends on arrival order.
pub fn validate_update(update: &Update) -> Result<(), Violation> {
    let result = match update {
        Update::ChannelColor { .. } | Update::ChannelVisible { .. } => Ok(()),
        Update::ChannelWindow { lo, hi, .. } => check_window(*lo, *hi),
        Update::ChannelOpacity { opacity, .. } => check_opacity(*opacity),
        Update::Transform(t) => check_transform(t),
        Update::Selection(ids) => {
            if ids.iter().any(|id| id.is_empty()) {
                Err(Rule::EmptyEntityId)
            } else {
                Ok(())
            }
        }
        Update::Hover(Some(id)) if id.is_empty() => Err(Rule::EmptyEntityId),
        Update::Hover(_) => Ok(()),
        Update::Measurement { id, value: Some(m) } => check_measurement(id, m),
        Update::Measurement { id, value: None } => {
            if is_valid_measurement_id(id) {
                Ok(())
            } else {
                Err(Rule::MeasurementId)
            }
        }
    };
    result.map_err(|rule| Violation::new(update.path(), rule))
}

/// Lists every broken invariant in `state`; empty iff the state is valid.
pub fn validate_state(state: &SessionState) -> Vec<Violation> {
    let mut out = Vec::new();
    for (id, ch) in &state.channels {
        if ch.channel_id != *id {
            out.push(Violation::new(format!("channels.{id}"), Rule::ChannelIdMismatch));
        }
        if let Err(rule) = check_window(ch.window_lo, ch.window_hi) {
            out.push(Violation::new(StatePath::ChannelWindow(*id), rule));
        }
        if let Err(rule) = check_opacity(ch.opacity) {
            out.push(Violation::new(StatePath::ChannelOpacity(*id), rule));
        }
    }
    if let Err(rule) = check_transform(&state.transform) {
        out.push(Violation::new(StatePath::Transform, rule));
    }
    if state.selection.iter().any(|id| id.is_empty()) {
        out.push(Violation::new(StatePath::Selection, Rule::EmptyEntityId));
    }
    if state.hover.as_deref() == Some("") {
        out.push(Violation::new(StatePath::Hover, Rule::EmptyEntityId));
    }
    for (id, m) in &state.measurements {
        if let Err(rule) = check_measurement(id, m) {
            out.push(Violation::new(format!("measurements.{id}"), rule));
        }
    }
    out
}

/// What [`SessionState::apply_delta`] did with each update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplyReport {
    pub written: Vec<StatePath>,
    /// Superseded by an equal-or-later stamp already recorded on the path.
    pub stale: Vec<StatePath>,
    pub rejected: Vec<Violation>,
}

impl SessionState {
    /// Applies `delta` stamped `(seq, sender)` with per-path last-writer-wins.
    ///
    /// An update is written iff its stamp is greater than the path's recorded
    /// stamp, comparing `seq` first and `sender` second. Invalid values are
    /// skipped and reported; the rest of the delta still applies. Within one
    /// delta the first update to a path wins.
    pub fn apply_delta(&mut self, delta: &StateDelta, seq: u64, sender: ClientId) -> ApplyReport {
        let mut report = ApplyReport::default();
        for update in &delta.updates {
            let path = update.path();
            if seq == 0 {
                report.rejected.push(Violation::new(&path, Rule::UnassignedSeq));
                continue;
            }
            if let Err(v) = validate_update(update) {
                report.rejected.push(v);
                continue;
            }
            let key = path.to_string();
            if let Some(stamp) = self.last_seq.get(&key) {
                if !stamp.is_superseded_by(seq, sender) {
                    report.stale.push(path);
                    continue;
                }
            }
            self.write(update);
            self.last_seq.insert(key, SeqStamp { seq, sender });
            report.written.push(path);
        }
        report
    }

    /// Unconditionally stores the value an update carries.
    pub(crate) fn write(&mut self, update: &Update) {
        fn channel(channels: &mut BTreeMap<ChannelId, ChannelState>, id: ChannelId) -> &mut ChannelState {
            channels.entry(id).or_insert_with(|| ChannelState::with_defaults(id))
        }
        let channels = &mut self.channels;
        match update {
            Update::ChannelColor { channel: id, color } => channel(channels, *id).color = *color,
            Update::ChannelWindow { channel: id, lo, hi } => {
                let ch = channel(channels, *id);
                ch.window_lo = *lo;
                ch.window_hi = *hi;
            }
            Update::ChannelVisible { channel: id, visible } => channel(channels, *id).visible = *visible,
            Update::ChannelOpacity { channel: id, opacity } => channel(channels, *id).opacity = *opacity,
            Update::Transform(t) => self.transform = *t,
            Update::Selection(s) => self.selection = s.clone(),
            Update::Hover(h) => self.hover = h.clone(),
            Update::Measurement { id, value: Some(m) } => {
                self.measurements.insert(id.clone(), m.clone());
            }
            Update::Measurement { id, value: None } => {
                self.measurements.remove(id);
            }
        }
    }

    /// Flattens the state into `path -> value`, ignoring sequence bookkeeping.
    /// Two states are path-value-equal iff their flattenings are equal.
    pub fn to_paths(&self) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for (id, ch) in &self.channels {
            for update in channel_updates(*id, ch) {
                out.insert(update.path().to_string(), update.value_json());
            }
        }
        for update in [
            Update::Transform(self.transform),
            Update::Selection(self.selection.clone()),
            Update::Hover(self.hover.clone()),
        ] {
            out.insert(update.path().to_string(), update.value_json());
        }
        for (id, m) in &self.measurements {
            let update = Update::Measurement { id: id.clone(), value: Some(m.clone()) };
            out.insert(update.path().to_string(), update.value_json());
        }
        out
    }

    /// Path-value equality: everything except `last_seq`.
    pub fn same_values(&self, other: &SessionState) -> bool {
        self.channels == other.channels
            && self.transform == other.transform
            && self.selection == other.selection
            && self.hover == other.hover
            && self.measurements == other.measurements
    }
}

fn channel_updates(id: ChannelId, ch: &ChannelState) -> [Update; 4] {
    [
        Update::ChannelColor { channel: id, color: ch.color },
        Update::ChannelWindow { channel: id, lo: ch.window_lo, hi: ch.window_hi },
        Update::ChannelVisible { channel: id, visible: ch.visible },
        Update::ChannelOpacity { channel: id, opacity: ch.opacity },
    ]
}

/// Minimal delta taking `a` to `b`.
///
/// Channels cannot be deleted, so a channel present in `a` but absent from
/// `b` produces no update.
pub fn diff_states(a: &SessionState, b: &SessionState) -> StateDelta {
    let mut delta = StateDelta::default();
    for (id, new) in &b.channels {
        let fields = channel_updates(*id, new);
        match a.channels.get(id) {
            None => delta.updates.extend(fields),
            Some(old) => {
                let olds = channel_updates(*id, old);
                delta.updates.extend(fields.into_iter().zip(olds).filter(|(n, o)| n != o).map(|(n, _)| n));
            }
        }
    }
    if a.transform != b.transform {
        delta.push(Update::Transform(b.transform));
    }
    if a.selection != b.selection {
        delta.push(Update::Selection(b.selection.clone()));
    }
    if a.hover != b.hover {
        delta.push(Update::Hover(b.hover.clone()));
    }
    for (id, m) in &b.measurements {
        if a.measurements.get(id) != Some(m) {
            delta.push(Update::Measurement { id: id.clone(), value: Some(m.clone()) });
        }
    }
    for id in a.measurements.keys() {
        if !b.measurements.contains_key(id) {
            delta.push(Update::Measurement { id: id.clone(), value: None });
        }
    }
    delta
}
