//! Websocket front end. One tick loop owns the session; socket readers only post parsed
//! client messages into its mailbox and forward broadcast frames.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::serve::ListenerExt;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::session::Session;
use crate::wire::{parse_client, ClientMessage, ProtocolError, WireMessage};

#[derive(Clone)]
struct Shared {
    mailbox: mpsc::UnboundedSender<ClientMessage>,
    frames: broadcast::Sender<Arc<str>>,
    latest: watch::Receiver<Arc<str>>,
    obstacle_ids: Arc<[String]>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid session: {0}")]
    Invalid(String),
    #[error("planner: {0}")]
    Core(#[from] fliqc_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A running service bound to a local address.
pub struct Running {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    ticker: JoinHandle<()>,
}

impl Running {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.ticker.abort();
        let _ = self.server.await;
    }

    /// Wait until the server stops on its own.
    pub async fn join(self) -> std::io::Result<()> {
        self.server.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

fn encode(msg: &WireMessage) -> Arc<str> {
    serde_json::to_string(msg).expect("wire messages always serialize").into()
}

async fn tick_loop(
    mut session: Session,
    mut mailbox: mpsc::UnboundedReceiver<ClientMessage>,
    frames: broadcast::Sender<Arc<str>>,
    latest: watch::Sender<Arc<str>>,
) {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / session.tick_rate()));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        while let Ok(msg) = mailbox.try_recv() {
            session.handle(msg);
        }
        if let Err(e) = session.tick() {
            tracing::error!("planner step failed: {e}");
            session.handle(ClientMessage::Pause);
        }
        match session.snapshot() {
            Ok(state) => {
                let frame = encode(&WireMessage::ServerState(state));
                latest.send_replace(frame.clone());
                let _ = frames.send(frame);
            }
            Err(e) => tracing::error!("snapshot failed: {e}"),
        }
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn state(State(shared): State<Shared>) -> impl IntoResponse {
    let frame = shared.latest.borrow().clone();
    ([(axum::http::header::CONTENT_TYPE, "application/json")], frame.to_string())
}

async fn ws(upgrade: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    upgrade.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = shared.frames.subscribe();
    let first = shared.latest.borrow().clone();
    if tx.send(Message::Text(first.as_ref().into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(f) => {
                    if tx.send(Message::Text(f.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = rx.next() => {
                let err = match incoming {
                    None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                    Some(Ok(Message::Text(text))) => match parse_client(text.as_str(), &shared.obstacle_ids) {
                        Ok(msg) => {
                            let _ = shared.mailbox.send(msg);
                            continue;
                        }
                        Err(e) => e,
                    },
                    Some(Ok(Message::Binary(_))) => ProtocolError::Binary,
                    Some(Ok(_)) => continue,
                };
                tracing::warn!("closing client: {err}");
                let close = CloseFrame { code: 1008, reason: err.to_string().into() };
                let _ = tx.send(Message::Close(Some(close))).await;
                return;
            }
        }
    }
}

/// Start the tick loop and the HTTP server on `addr` (port 0 picks a free port).
pub async fn spawn(session: Session, addr: SocketAddr) -> Result<Running, ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let listener = listener.tap_io(|tcp| {
        if let Err(e) = tcp.set_nodelay(true) {
            tracing::warn!("TCP_NODELAY: {e}");
        }
    });
    let initial = encode(&WireMessage::ServerState(session.snapshot()?));
    let (mail_tx, mail_rx) = mpsc::unbounded_channel();
    let (frames, _) = broadcast::channel(64);
    let (latest_tx, latest_rx) = watch::channel(initial);
    let shared = Shared {
        mailbox: mail_tx,
        frames: frames.clone(),
        latest: latest_rx,
        obstacle_ids: session.obstacle_ids().into(),
    };
    let ticker = tokio::spawn(tick_loop(session, mail_rx, frames, latest_tx));
    let app = Router::new()
        .route("/healthz", get(healthz))
        .route("/state", get(state))
        .route("/ws", get(ws))
        .with_state(shared);
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    tracing::info!("listening on {addr}");
    Ok(Running { addr, shutdown: Some(stop_tx), server, ticker })
}
