//! WebSocket transport around [`SessionHub`].

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use log::{debug, info, warn};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use tissuelink_core::protocol::{encode_text, SessionCode};
use tissuelink_core::scene::{load_scene, SceneError};
use tissuelink_core::session::{ConnId, Effects, HubConfig, SessionHub};

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub host: String,
    pub port: u16,
    pub scene: Option<PathBuf>,
    pub hub: HubConfig,
    /// Fixes session codes and client ids, for tests.
    pub seed: Option<u64>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            host: "127.0.0.1".into(),
            port: 8787,
            scene: None,
            hub: HubConfig::default(),
            seed: None,
        }
    }
}

#[derive(Debug)]
enum Outgoing {
    Text(String),
    Close,
}

struct Shared {
    hub: SessionHub,
    outboxes: HashMap<ConnId, mpsc::UnboundedSender<Outgoing>>,
}

impl Shared {
    fn deliver(&mut self, fx: Effects) {
        for out in fx.send {
            if let Some(tx) = self.outboxes.get(&out.conn) {
                let _ = tx.send(Outgoing::Text(encode_text(&out.message)));
            }
        }
        for conn in fx.close {
            if let Some(tx) = self.outboxes.remove(&conn) {
                let _ = tx.send(Outgoing::Close);
            }
        }
    }
}

pub struct AppState {
    shared: Mutex<Shared>,
    next_conn: AtomicU64,
}

impl AppState {
    fn with<T>(&self, f: impl FnOnce(&mut Shared) -> T) -> T {
        f(&mut self.shared.lock().expect("hub lock poisoned"))
    }
}

pub struct Server {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl Server {
    pub async fn bind(options: ServerOptions) -> Result<Server, ServerError> {
        let (catalog, checksum) = match &options.scene {
            Some(dir) => {
                let scene = load_scene(dir)?;
                info!(
                    "scene {:?}: {} entities, checksum {}",
                    scene.metadata.name,
                    scene.entities().len(),
                    scene.checksum
                );
                (Some(scene.catalog()), scene.checksum.clone())
            }
            None => (None, String::new()),
        };
        let rng = match options.seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        let listener = TcpListener::bind((options.host.as_str(), options.port)).await?;
        let state = Arc::new(AppState {
            shared: Mutex::new(Shared {
                hub: SessionHub::new(options.hub, catalog, checksum, rng),
                outboxes: HashMap::new(),
            }),
            next_conn: AtomicU64::new(1),
        });
        Ok(Server { listener, state })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until `shutdown` resolves.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        info!("listening on {}", self.local_addr());
        let ticker = tokio::spawn(heartbeat(self.state.clone()));
        let app = router(self.state);
        let result = axum::serve(self.listener, app).with_graceful_shutdown(shutdown).await;
        ticker.abort();
        result
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("cannot listen: {0}")]
    Io(#[from] std::io::Error),
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(upgrade))
        .route("/ws", get(upgrade))
        .route("/healthz", get(healthz))
        .route("/sessions/{code}/state", get(session_state))
        .with_state(state)
}

fn cors(body: impl IntoResponse) -> Response {
    ([(header::ACCESS_CONTROL_ALLOW_ORIGIN, "*")], body).into_response()
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let (sessions, connections) = state.with(|s| (s.hub.live_sessions(), s.hub.connections()));
    cors(Json(json!({ "status": "ok", "sessions": sessions, "connections": connections })))
}

/// Authoritative state of one session, for debugging and replica checks.
async fn session_state(State(state): State<Arc<AppState>>, Path(code): Path<String>) -> Response {
    let Ok(code) = code.parse::<SessionCode>() else {
        return cors((StatusCode::BAD_REQUEST, "session codes are four digits"));
    };
    let body = state.with(|s| {
        s.hub.session(code).map(|r| {
            json!({
                "code": code,
                "seq": r.seq(),
                "members": r.connected().count(),
                "state": r.state,
            })
        })
    });
    match body {
        Some(body) => cors(Json(body)),
        None => cors((StatusCode::NOT_FOUND, "unknown session")),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: Arc<AppState>) {
    let conn = state.next_conn.fetch_add(1, Ordering::Relaxed);
    let (tx, mut rx) = mpsc::unbounded_channel();
    state.with(|s| {
        s.outboxes.insert(conn, tx);
        s.hub.connect(conn, Instant::now());
    });
    debug!("connection {conn} opened");

    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(out) = rx.recv().await {
            match out {
                Outgoing::Text(text) => {
                    if sink.send(WsMessage::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close => {
                    let _ = sink.send(WsMessage::Close(None)).await;
                    break;
                }
            }
        }
    });

    while let Some(frame) = stream.next().await {
        let bytes = match frame {
            Ok(WsMessage::Text(text)) => text.as_bytes().to_vec(),
            Ok(WsMessage::Binary(data)) => data.to_vec(),
            Ok(WsMessage::Close(_)) => break,
            Ok(_) => continue,
            Err(e) => {
                warn!("connection {conn}: {e}");
                break;
            }
        };
        let closed = state.with(|s| {
            let fx = s.hub.handle_frame(conn, &bytes, Instant::now());
            s.deliver(fx);
            !s.outboxes.contains_key(&conn)
        });
        if closed {
            break;
        }
    }

    state.with(|s| {
        s.hub.disconnect(conn, Instant::now());
        s.outboxes.remove(&conn);
    });
    let _ = writer.await;
    debug!("connection {conn} closed");
}

async fn heartbeat(state: Arc<AppState>) {
    let heartbeat = state.with(|s| s.hub.config().heartbeat);
    let period = (heartbeat / 10).clamp(Duration::from_millis(10), Duration::from_secs(1));
    let mut interval = tokio::time::interval(period);
    loop {
        interval.tick().await;
        state.with(|s| {
            let fx = s.hub.tick(Instant::now());
            s.deliver(fx);
        });
    }
}
