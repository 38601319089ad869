//! Live preview service: holds the authoritative scene, takes listener
//! poses and scene edits over a WebSocket and pushes mixes on every tick.
//!
//! Routes: `/ws` (JSON messages, see [`protocol`]), `GET /scene` and
//! `GET /healthz`.

pub mod protocol;
pub mod state;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use aurastage_core::scene::SceneError;
use aurastage_core::Scene;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::protocol::{parse_client, ServerMessage};
use crate::state::{Command, Engine, Snapshot};

pub const DEFAULT_TICK_HZ: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid scene: {0}")]
    Scene(#[from] SceneError),
    #[error("tick rate must be positive and finite, got {0}")]
    TickRate(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub tick_hz: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            tick_hz: DEFAULT_TICK_HZ,
        }
    }
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    async fn snapshot(&self) -> Option<Snapshot> {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Command::Snapshot { reply }).ok()?;
        rx.await.ok()
    }
}

/// A running service. Dropping it leaves the server running; call
/// [`ServiceHandle::shutdown`] to stop it.
pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    server: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub async fn shutdown(self) -> Result<(), ServiceError> {
        let _ = self.shutdown.send(());
        join(self.server).await
    }

    /// Waits for the server to stop on its own.
    pub async fn wait(self) -> Result<(), ServiceError> {
        join(self.server).await
    }
}

async fn join(server: JoinHandle<std::io::Result<()>>) -> Result<(), ServiceError> {
    match server.await {
        Ok(res) => Ok(res?),
        Err(e) => Err(std::io::Error::other(e).into()),
    }
}

/// Binds and starts serving in the background. Port 0 picks a free port.
pub async fn start(scene: Scene, cfg: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    scene.validate()?;
    if !(cfg.tick_hz.is_finite() && cfg.tick_hz > 0.0) {
        return Err(ServiceError::TickRate(cfg.tick_hz));
    }
    let listener = TcpListener::bind(cfg.bind).await?;
    let addr = listener.local_addr()?;

    let (commands, rx) = mpsc::unbounded_channel();
    let engine =
        tokio::spawn(Engine::new(scene).run(rx, Duration::from_secs_f64(1.0 / cfg.tick_hz)));
    let app = router(AppState {
        commands,
        next_id: Arc::new(AtomicU64::new(1)),
    });

    let (shutdown, stop) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let res = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop.await;
            })
            .await;
        engine.abort();
        res
    });
    Ok(ServiceHandle {
        addr,
        shutdown,
        server,
    })
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/scene", get(get_scene))
        .route("/healthz", get(healthz))
        .with_state(state)
}

async fn get_scene(State(state): State<AppState>) -> Response {
    match state.snapshot().await {
        Some(s) => ([("x-scene-version", s.version.to_string())], Json(s.scene)).into_response(),
        None => StatusCode::SERVICE_UNAVAILABLE.into_response(),
    }
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.snapshot().await {
        Some(s) => Json(json!({
            "status": "ok",
            "scene_version": s.version,
            "clients": s.clients,
            "t": s.t,
        }))
        .into_response(),
        None => StatusCode::SERVICE_UNAVAILABLE.into_response(),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

async fn client_session(mut socket: WebSocket, state: AppState) {
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let (tx, mut outbox) = mpsc::unbounded_channel();
    if state
        .commands
        .send(Command::Connect { id, tx: tx.clone() })
        .is_err()
    {
        return;
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match parse_client(text.as_str()) {
                    Ok(msg) => {
                        if state.commands.send(Command::Message { id, msg }).is_err() {
                            break;
                        }
                    }
                    Err(why) => {
                        let _ = tx.send(ServerMessage::protocol_error(why));
                    }
                },
                Some(Ok(Message::Binary(_))) => {
                    let _ = tx.send(ServerMessage::protocol_error("binary frames are not supported"));
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            Some(out) = outbox.recv() => {
                let text = serde_json::to_string(&out).expect("server messages serialize");
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
        }
    }
    let _ = state.commands.send(Command::Disconnect { id });
}
