//! Synthetic headset: replays a hand trace into a live session.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::info;
use serde_json::{json, Value};
use tokio::time::Instant;

use tissuelink_core::gesture::{GestureConfig, GestureEngine, GestureError};
use tissuelink_core::protocol::{ClientRole, SessionCode, SessionState};
use tissuelink_core::scene::{load_scene, Scene, SceneError};
use tissuelink_core::trace::{compare_states, load_trace, FrameEvent, PathDiff, TraceError};

use crate::client::{ClientError, SessionClient};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub url: String,
    /// Session to join; `None` creates one.
    pub code: Option<SessionCode>,
    pub trace: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    pub speed: f64,
    pub assert: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub quiescence: Duration,
    /// Extra wait before each outbound delta.
    pub delay: Duration,
    pub gesture: GestureConfig,
}

impl Scenario {
    pub fn new(url: impl Into<String>) -> Self {
        Scenario {
            url: url.into(),
            code: None,
            trace: None,
            scene: None,
            speed: 1.0,
            assert: None,
            record: None,
            quiescence: Duration::from_millis(500),
            delay: Duration::ZERO,
            gesture: GestureConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("scene checksum {ours} differs from the server's {theirs}")]
    ChecksumMismatch { ours: String, theirs: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("expected state file: {0}")]
    Expected(String),
    #[error("replaying a trace needs --scene; no local copy of the server's scene was found")]
    NoScene,
    #[error(transparent)]
    Gesture(#[from] GestureError),
    #[error("speed must be positive")]
    BadSpeed,
    #[error("{} path(s) differ from the expected state", .0.len())]
    AssertionFailed(Vec<PathDiff>),
    #[error("cannot write record: {0}")]
    Record(#[from] std::io::Error),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::AssertionFailed(_) => 2,
            SimError::Client(_) | SimError::ChecksumMismatch { .. } => 3,
            SimError::Trace(_) | SimError::Scene(_) | SimError::Expected(_) | SimError::NoScene => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: SessionCode,
    pub state: SessionState,
    pub events: Vec<FrameEvent>,
    pub deltas_sent: usize,
}

fn load_expected(path: &PathBuf) -> Result<SessionState, SimError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| SimError::Expected(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SimError::Expected(format!("{}: {e}", path.display())))
}

pub async fn run_scenario(s: &Scenario) -> Result<Outcome, SimError> {
    if !(s.speed > 0.0 && s.speed.is_finite()) {
        return Err(SimError::BadSpeed);
    }
    // Fail on local inputs before touching the network.
    let frames = s.trace.as_ref().map(load_trace).transpose()?;
    let mut scene: Option<Scene> = s.scene.as_ref().map(load_scene).transpose()?;
    let expected = s.assert.as_ref().map(load_expected).transpose()?;

    let mut client = SessionClient::connect(&s.url).await?;
    let code = match s.code {
        Some(code) => code,
        None => {
            let code = client.create_session().await?;
            info!("created session {code}");
            // Other devices need the code to join.
            println!("session {code}");
            code
        }
    };
    let ack = client.join(code, ClientRole::Simulator, None).await?.expect("fresh joins are acked");
    if scene.is_none() && frames.is_some() {
        scene = Some(find_scene(s.trace.as_deref(), &ack.catalog_checksum).ok_or(SimError::NoScene)?);
    }
    if let Some(scene) = &scene {
        if scene.checksum != ack.catalog_checksum {
            return Err(SimError::ChecksumMismatch {
                ours: scene.checksum.clone(),
                theirs: ack.catalog_checksum,
            });
        }
    }

    let mut record = Vec::new();
    let mut events = Vec::new();
    let mut deltas_sent = 0;
    if let (Some(frames), Some(scene)) = (frames, &scene) {
        let mut engine = GestureEngine::new(s.gesture.clone());
        let start = Instant::now();
        let t0 = frames.first().map(|f| f.t).unwrap_or(0.0);
        for (i, frame) in frames.iter().enumerate() {
            let due = start + Duration::from_secs_f64((frame.t - t0) / s.speed);
            // Keep folding broadcasts in while waiting for the frame's time.
            loop {
                let now = Instant::now();
                if now >= due {
                    break;
                }
                client.pump(due - now).await?;
            }
            let out = engine.update(frame, scene, client.state())?;
            for event in out.events {
                let fe = FrameEvent { frame: i, event };
                record.push(json!({ "type": "event", "entry": fe }));
                events.push(fe);
            }
            if !out.delta.is_empty() {
                if !s.delay.is_zero() {
                    tokio::time::sleep(s.delay).await;
                }
                record.push(json!({ "type": "sent", "frame": i, "delta": out.delta }));
                client.send_delta(out.delta).await?;
                deltas_sent += 1;
            }
        }
    }
    client.quiesce(s.quiescence).await?;

    for r in &client.received {
        record.push(json!({ "type": "received", "seq": r.seq, "sender": r.sender, "delta": r.delta }));
    }
    if let Some(path) = &s.record {
        write_record(path, &record)?;
    }

    let state = client.state().clone();
    client.close().await;
    if let Some(expected) = expected {
        let diffs = compare_states(&expected, &state);
        if !diffs.is_empty() {
            return Err(SimError::AssertionFailed(diffs));
        }
    }
    Ok(Outcome { code, state, events, deltas_sent })
}

/// Looks for a local copy of the server's scene, matched by checksum, in
/// the `scenes/` directory beside the trace's directory and then in
/// `./fixtures/scenes`.
fn find_scene(trace: Option<&Path>, checksum: &str) -> Option<Scene> {
    let mut roots = Vec::new();
    if let Some(dir) = trace.and_then(Path::parent).and_then(Path::parent) {
        roots.push(dir.join("scenes"));
    }
    roots.push(PathBuf::from("fixtures/scenes"));
    roots
        .iter()
        .filter_map(|root| std::fs::read_dir(root).ok())
        .flat_map(|entries| entries.filter_map(|e| e.ok()).map(|e| e.path()))
        .filter(|dir| dir.join("scene.json").is_file())
        .filter_map(|dir| load_scene(dir).ok())
        .find(|scene| scene.checksum == checksum)
}

fn write_record(path: &PathBuf, lines: &[Value]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut f, line)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
