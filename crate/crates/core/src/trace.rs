//! Recorded hand-pose traces: parsing, summaries, offline replay and
//! state assertions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gesture::{
    pinch_detect, GestureConfig, GestureEngine, GestureError, GestureEvent, Hand, HandFrame, HandPinch,
};
use crate::protocol::{ClientId, SessionState, StateDelta};
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Parses JSON-lines frames. Blank lines are skipped; timestamps must be
/// finite and strictly increasing.
pub fn parse_trace(text: &str) -> Result<Vec<HandFrame>, TraceError> {
    let mut frames: Vec<HandFrame> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let frame: HandFrame =
            serde_json::from_str(raw).map_err(|e| TraceError::Parse { line, message: e.to_string() })?;
        if !frame.t.is_finite() {
            return Err(TraceError::Parse { line, message: "timestamp is not finite".into() });
        }
        if let Some(prev) = frames.last() {
            if frame.t <= prev.t {
                return Err(TraceError::Parse {
                    line,
                    message: format!("timestamp {} does not advance past {}", frame.t, prev.t),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<HandFrame>, TraceError> {
    parse_trace(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStats {
    pub frames: usize,
    pub duration_sec: f64,
    pub left_presence: f64,
    pub right_presence: f64,
    /// Released-to-pinching transitions over both hands.
    pub pinch_engages: usize,
}

pub fn trace_stats(frames: &[HandFrame], config: &GestureConfig) -> TraceStats {
    let n = frames.len();
    let ratio = |hand: Hand| {
        if n == 0 {
            0.0
        } else {
            frames.iter().filter(|f| f.hand(hand).is_some()).count() as f64 / n as f64
        }
    };
    let mut pinch_engages = 0;
    for hand in Hand::BOTH {
        let mut state = HandPinch::RELEASED;
        for f in frames {
            let next = match f.hand(hand) {
                Some(p) => pinch_detect(p.index, p.thumb, state, f.t, config),
                None => HandPinch::RELEASED,
            };
            if next.pinching && !state.pinching {
                pinch_engages += 1;
            }
            state = next;
        }
    }
    TraceStats {
        frames: n,
        duration_sec: match (frames.first(), frames.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        },
        left_presence: ratio(Hand::Left),
        right_presence: ratio(Hand::Right),
        pinch_engages,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvent {
    pub frame: usize,
    #[serde(flatten)]
    pub event: GestureEvent,
}

#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub events: Vec<FrameEvent>,
    pub deltas: Vec<(usize, StateDelta)>,
    pub state: SessionState,
}

/// Sender stamped on deltas during an offline replay.
pub const OFFLINE_SENDER: ClientId = ClientId(1);

/// Runs a trace through a fresh engine with a local state standing in for
/// the server: each frame's delta is applied before the next frame.
pub fn replay_offline(
    scene: &Scene,
    frames: &[HandFrame],
    config: &GestureConfig,
) -> Result<Replay, GestureError> {
    let mut engine = GestureEngine::new(config.clone());
    let mut replay = Replay::default();
    let mut seq = 0;
    for (i, frame) in frames.iter().enumerate() {
        let out = engine.update(frame, scene, &replay.state)?;
        replay.events.extend(out.events.into_iter().map(|event| FrameEvent { frame: i, event }));
        if !out.delta.is_empty() {
            seq += 1;
            replay.state.apply_delta(&out.delta, seq, OFFLINE_SENDER);
            replay.deltas.push((i, out.delta));
        }
    }
    Ok(replay)
}

/// Relative tolerance for numbers in state assertions.
pub const ASSERT_REL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDiff {
    pub path: String,
    pub expected: Option<Value>,
    pub actual: Option<Value>,
}

/// Path-by-path differences, ignoring seq bookkeeping. Numbers match when
/// within [`ASSERT_REL_TOLERANCE`] of the larger magnitude (absolute below 1).
pub fn compare_states(expected: &SessionState, actual: &SessionState) -> Vec<PathDiff> {
    let e = expected.to_paths();
    let a = actual.to_paths();
    let mut paths: Vec<&String> = e.keys().chain(a.keys()).collect();
    paths.sort();
    paths.dedup();
    paths
        .into_iter()
        .filter(|p| match (e.get(*p), a.get(*p)) {
            (Some(x), Some(y)) => !values_close(x, y),
            _ => true,
        })
        .map(|p| PathDiff { path: p.clone(), expected: e.get(p).cloned(), actual: a.get(p).cloned() })
        .collect()
}

fn values_close(x: &Value, y: &Value) -> bool {
    match (x, y) {
        (Value::Number(a), Value::Number(b)) => match (a.as_f64(), b.as_f64()) {
            (Some(a), Some(b)) => (a - b).abs() <= ASSERT_REL_TOLERANCE * a.abs().max(b.abs()).max(1.0),
            _ => a == b,
        },
        (Value::Array(a), Value::Array(b)) => {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_close(x, y))
        }
        (Value::Object(a), Value::Object(b)) => {
            a.len() == b.len() && a.iter().all(|(k, v)| b.get(k).is_some_and(|w| values_close(v, w)))
        }
        _ => x == y,
    }
}

/// Compares an event log against expected entries. Each expected entry
/// names `frame` and `kind` plus any payload fields to check; nested objects
/// are matched the same way, and fields an entry leaves out are not
/// compared. Returns one message per mismatch.
pub fn compare_event_log(expected: &[Value], actual: &[FrameEvent]) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, (want, got)) in expected.iter().zip(actual).enumerate() {
        let got = serde_json::to_value(got).expect("events serialize");
        if !subset(want, &got) {
            problems.push(format!("event {i}: expected {want}, got {got}"));
        }
    }
    if expected.len() != actual.len() {
        problems.push(format!("expected {} events, got {}", expected.len(), actual.len()));
    }
    problems
}

fn subset(want: &Value, got: &Value) -> bool {
    match (want, got) {
        (Value::Object(w), Value::Object(g)) => {
            w.iter().all(|(k, v)| g.get(k).is_some_and(|gv| subset(v, gv)))
        }
        _ => want == got,
    }
}

/// Reads a JSON-lines file of expected events.
pub fn parse_event_log(text: &str) -> Result<Vec<Value>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}
