//! Golden trace checks shared by the core tests and the acceptance runner.
//! Each trace is replayed offline; the event log must match exactly, and
//! placements and lengths are checked against closed-form values and a
//! per-frame oracle written with plain matrices.

#![allow(dead_code)]
// Checks are written as `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use tissuelink_core::gesture::{GestureConfig, GestureEvent, HandFrame, HandPose};
use tissuelink_core::protocol::{SessionState, VolumeTransform};
use tissuelink_core::scene::{load_scene, Scene};
use tissuelink_core::trace::{
    compare_event_log, compare_states, load_trace, parse_event_log, replay_offline, Replay,
};

pub const TRACES: [&str; 7] =
    ["hover", "select_toggle", "translate_one", "zoom_2x", "yaw_quarter", "measure_simple", "measure_abort"];

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn demo() -> Scene {
    load_scene(fixtures().join("scenes/demo")).expect("demo scene loads")
}

pub fn run(name: &str) -> Result<(Vec<HandFrame>, Replay), String> {
    let frames = load_trace(fixtures().join(format!("traces/{name}.jsonl"))).map_err(|e| e.to_string())?;
    let replay = replay_offline(&demo(), &frames, &GestureConfig::default()).map_err(|e| e.to_string())?;
    let log = std::fs::read_to_string(fixtures().join(format!("traces/{name}.events.jsonl")))
        .map_err(|e| e.to_string())?;
    let expected = parse_event_log(&log).map_err(|e| e.to_string())?;
    let problems = compare_event_log(&expected, &replay.events);
    ensure!(problems.is_empty(), "{name}: {problems:?}");
    Ok((frames, replay))
}

type M3 = [[f64; 3]; 3];

pub const TOLERANCE: f64 = 1e-9;

fn quat_matrix(q: [f64; 4]) -> M3 {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn yaw_matrix(a: f64) -> M3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply(a: &M3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mid(p: &HandPose) -> [f64; 3] {
    [0, 1, 2].map(|k| (p.index[k] + p.thumb[k]) / 2.0)
}

fn pinched(p: &Option<HandPose>) -> bool {
    p.as_ref().is_some_and(|p| norm(sub(p.index, p.thumb)) < 0.02)
}

fn close_vec(a: [f64; 3], b: [f64; 3]) -> bool {
    norm(sub(a, b)) <= TOLERANCE * norm(b).max(1.0)
}

fn check_transform(got: &VolumeTransform, t: [f64; 3], r: &M3, s: f64, what: &str) -> Check {
    ensure!(close_vec(got.translation, t), "{what}: translation {:?} vs {t:?}", got.translation);
    ensure!((got.scale - s).abs() <= TOLERANCE * s, "{what}: scale {} vs {s}", got.scale);
    let gr = quat_matrix(got.rotation);
    for i in 0..3 {
        ensure!(close_vec(gr[i], r[i]), "{what}: rotation row {i} {:?} vs {:?}", gr[i], r[i]);
    }
    Ok(())
}

/// Placement the oracle expects for a two-hand grab taken at `start` and
/// observed at `now`.
fn two_hand_oracle(start: &HandFrame, now: &HandFrame, t0: &VolumeTransform) -> (VolumeTransform, M3) {
    let (gl, gr) = (mid(start.left.as_ref().unwrap()), mid(start.right.as_ref().unwrap()));
    let (l, r) = (mid(now.left.as_ref().unwrap()), mid(now.right.as_ref().unwrap()));
    let ratio = norm(sub(r, l)) / norm(sub(gr, gl));
    let (u, v) = (sub(gr, gl), sub(r, l));
    // Rotation about +Y carrying u's XZ heading onto v's.
    let yaw = (u[2] * v[0] - u[0] * v[2]).atan2(u[0] * v[0] + u[2] * v[2]);
    let ry = yaw_matrix(yaw);
    let g = [0, 1, 2].map(|k| (gl[k] + gr[k]) / 2.0);
    let m = [0, 1, 2].map(|k| (l[k] + r[k]) / 2.0);
    let d = sub(t0.translation, g);
    let t = add(m, apply(&ry, d.map(|x| x * ratio)));
    let rot = mul(&ry, &quat_matrix(t0.rotation));
    (VolumeTransform { translation: t, rotation: [1.0, 0.0, 0.0, 0.0], scale: t0.scale * ratio }, rot)
}

fn check_two_hand_stepwise(frames: &[HandFrame], replay: &Replay) -> Check {
    let start =
        frames.iter().position(|f| pinched(&f.left) && pinched(&f.right)).ok_or("no two-hand grab")?;
    let t0 = VolumeTransform::IDENTITY;
    let mut checked = 0;
    for fe in &replay.events {
        if let GestureEvent::TransformUpdated { transform } = &fe.event {
            let (want, rot) = two_hand_oracle(&frames[start], &frames[fe.frame], &t0);
            check_transform(transform, want.translation, &rot, want.scale, &format!("frame {}", fe.frame))?;
            checked += 1;
        }
    }
    ensure!(checked > 0, "no transform updates");
    Ok(())
}

pub fn hover() -> Check {
    let (_, replay) = run("hover")?;
    ensure!(replay.state.hover.is_none(), "hover left set");
    Ok(())
}

pub fn select_toggle() -> Check {
    let (_, replay) = run("select_toggle")?;
    ensure!(replay.state.selection.is_empty(), "selection {:?}", replay.state.selection);
    Ok(())
}

pub fn select_cube() -> Check {
    let (_, replay) = run("select_cube")?;
    let text =
        std::fs::read_to_string(fixtures().join("expected/select_cube.json")).map_err(|e| e.to_string())?;
    let expected: SessionState = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let diffs = compare_states(&expected, &replay.state);
    ensure!(diffs.is_empty(), "{diffs:?}");
    Ok(())
}

pub fn translate_one() -> Check {
    let (frames, replay) = run("translate_one")?;
    let start = frames.iter().position(|f| pinched(&f.right)).ok_or("no pinch")?;
    let anchor = mid(frames[start].right.as_ref().unwrap());
    for fe in &replay.events {
        let GestureEvent::TransformUpdated { transform } = &fe.event else { continue };
        let want = sub(mid(frames[fe.frame].right.as_ref().unwrap()), anchor);
        ensure!(close_vec(transform.translation, want), "frame {}", fe.frame);
    }
    let identity = quat_matrix([1.0, 0.0, 0.0, 0.0]);
    check_transform(&replay.state.transform, [0.0, 0.3, 0.0], &identity, 1.0, "final")
}

pub fn zoom_2x() -> Check {
    let (frames, replay) = run("zoom_2x")?;
    check_two_hand_stepwise(&frames, &replay)?;
    let identity = quat_matrix([1.0, 0.0, 0.0, 0.0]);
    // Scaling by 2 about the hand midpoint (0, 1, -0.5) moves the origin to
    // (0, -1, 0.5).
    check_transform(&replay.state.transform, [0.0, -1.0, 0.5], &identity, 2.0, "final")
}

pub fn yaw_quarter() -> Check {
    let (frames, replay) = run("yaw_quarter")?;
    check_two_hand_stepwise(&frames, &replay)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let q = [h, 0.0, -h, 0.0];
    let r = quat_matrix(q);
    ensure!(close_vec(r[0], [0.0, 0.0, -1.0]), "oracle rotation");
    check_transform(&replay.state.transform, [-0.5, 0.0, -0.5], &r, 1.0, "final")?;
    for (k, (got, want)) in replay.state.transform.rotation.iter().zip(q).enumerate() {
        ensure!((got - want).abs() < TOLERANCE, "quaternion {k}");
    }
    Ok(())
}

pub fn measure_simple() -> Check {
    let (_, replay) = run("measure_simple")?;
    let m = replay.state.measurements.get("m1").ok_or("no measurement m1")?;
    ensure!(m.finalized, "m1 not finalized");
    ensure!((m.length_um - 5.0).abs() <= 5.0 * TOLERANCE, "length {}", m.length_um);
    ensure!(close_vec(m.endpoint_a, [0.0, 0.0, 0.0]), "endpoint a {:?}", m.endpoint_a);
    ensure!(close_vec(m.endpoint_b, [3.0, 4.0, 0.0]), "endpoint b {:?}", m.endpoint_b);
    let Some(GestureEvent::MeasureFinalized { measurement }) = replay.events.last().map(|e| &e.event) else {
        return Err("last event is not the finalization".into());
    };
    ensure!(measurement == m, "finalized event differs from state");
    Ok(())
}

pub fn measure_abort() -> Check {
    let (_, replay) = run("measure_abort")?;
    ensure!(replay.state.measurements.is_empty(), "{:?}", replay.state.measurements);
    Ok(())
}

pub fn check(name: &str) -> Check {
    match name {
        "hover" => hover(),
        "select_toggle" => select_toggle(),
        "select_cube" => select_cube(),
        "translate_one" => translate_one(),
        "zoom_2x" => zoom_2x(),
        "yaw_quarter" => yaw_quarter(),
        "measure_simple" => measure_simple(),
        "measure_abort" => measure_abort(),
        other => Err(format!("no check for trace {other}")),
    }
}
