//! Live service: runs the balance simulation in real time and exposes it to
//! a browser console over HTTP and WebSocket.
//!
//! One task owns the [`LiveSim`]. Commands queue up and are applied between
//! control ticks; every tick publishes a JSON [`StateFrame`].

mod command;
mod sim;

use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use copbal::experiment::ExperimentError;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;

pub use command::{Command, CommandError, COMMAND_NAMES};
pub use sim::{LiveSim, SimConfig, StateFrame, TrialOutcome, TrialStatus};

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub host: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    /// Wall time per control tick. 50 ms streams at 20 Hz in real time.
    pub tick_interval: Duration,
    pub sim: SimConfig,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            tick_interval: Duration::from_millis(50),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LiveError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sim(#[from] ExperimentError),
}

enum Request {
    Command(Command, oneshot::Sender<Result<(Value, u64), CommandError>>),
    Calibration(oneshot::Sender<Value>),
    Trial(oneshot::Sender<Value>),
}

#[derive(Clone)]
struct AppState {
    requests: mpsc::Sender<Request>,
    frames: watch::Receiver<Option<Arc<str>>>,
    shutdown: watch::Receiver<bool>,
}

/// A running service. Dropping it leaves the service running; call
/// [`LiveServer::shutdown`] to stop it.
pub struct LiveServer {
    addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    server: JoinHandle<io::Result<()>>,
    sim: JoinHandle<()>,
}

impl LiveServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the simulation and closes every connection.
    pub async fn shutdown(self) -> io::Result<()> {
        let _ = self.shutdown.send(true);
        let _ = self.sim.await;
        self.server.await.map_err(io::Error::other)?
    }

    /// Runs until the server exits on its own.
    pub async fn wait(self) -> io::Result<()> {
        self.server.await.map_err(io::Error::other)?
    }
}

/// Binds the port and starts the simulation and HTTP tasks.
pub async fn serve_live(config: LiveConfig) -> Result<LiveServer, LiveError> {
    let listener = tokio::net::TcpListener::bind((config.host, config.port))
        .await
        .map_err(|e| match e.kind() {
            io::ErrorKind::AddrInUse => LiveError::PortInUse(config.port),
            _ => LiveError::Io(e),
        })?;
    let addr = listener.local_addr()?;
    let mut sim = LiveSim::new(config.sim)?;

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let (frames_tx, frames_rx) = watch::channel(None);
    let (req_tx, mut req_rx) = mpsc::channel::<Request>(64);

    let mut stop = shutdown_rx.clone();
    let tick = config.tick_interval;
    let sim_task = tokio::spawn(async move {
        let mut interval = tokio::time::interval(tick);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                _ = interval.tick() => {}
                _ = stopped(&mut stop) => break,
            }
            while let Ok(req) = req_rx.try_recv() {
                match req {
                    Request::Command(cmd, reply) => {
                        let t = sim.engine().t_ms();
                        let _ = reply.send(sim.apply(cmd).map(|v| (v, t)));
                    }
                    Request::Calibration(reply) => {
                        let _ = reply
                            .send(json!({ "cells": sim.engine().plant().sensors.store().cells() }));
                    }
                    Request::Trial(reply) => {
                        let _ =
                            reply.send(json!({ "trial": sim.trial(), "rows": sim.trial_rows() }));
                    }
                }
            }
            let frame = sim.tick();
            let text = serde_json::to_string(&frame).expect("frames serialize");
            frames_tx.send_replace(Some(text.into()));
        }
    });

    let state = AppState {
        requests: req_tx,
        frames: frames_rx,
        shutdown: shutdown_rx.clone(),
    };
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/api/state", get(latest_frame))
        .route("/api/calibration", get(calibration).post(set_calibration))
        .route("/api/trial", get(trial))
        .route("/api/{command}", post(command))
        .fallback(|| async { error_response(&CommandError::Unknown("no such route".into())) })
        .with_state(state);

    let mut stop = shutdown_rx;
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move { stopped(&mut stop).await })
            .await
    });

    Ok(LiveServer {
        addr,
        shutdown: shutdown_tx,
        server,
        sim: sim_task,
    })
}

async fn stopped(rx: &mut watch::Receiver<bool>) {
    let _ = rx.wait_for(|s| *s).await;
}

fn error_response(e: &CommandError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(e.to_json())).into_response()
}

async fn command(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> Response {
    run_command(&state, &name, &body).await
}

async fn set_calibration(State(state): State<AppState>, body: Bytes) -> Response {
    run_command(&state, "calibration", &body).await
}

async fn run_command(state: &AppState, name: &str, body: &[u8]) -> Response {
    let cmd = match Command::parse(name, body) {
        Ok(c) => c,
        Err(e) => return error_response(&e),
    };
    let (tx, rx) = oneshot::channel();
    if state
        .requests
        .send(Request::Command(cmd, tx))
        .await
        .is_err()
    {
        return error_response(&CommandError::Stopped);
    }
    match rx.await {
        Ok(Ok((applied, t_ms))) => Json(json!({
            "ok": true,
            "command": name,
            "applied": applied,
            "t_ms": t_ms,
        }))
        .into_response(),
        Ok(Err(e)) => error_response(&e),
        Err(_) => error_response(&CommandError::Stopped),
    }
}

async fn query(state: &AppState, make: fn(oneshot::Sender<Value>) -> Request) -> Response {
    let (tx, rx) = oneshot::channel();
    if state.requests.send(make(tx)).await.is_err() {
        return error_response(&CommandError::Stopped);
    }
    match rx.await {
        Ok(v) => Json(v).into_response(),
        Err(_) => error_response(&CommandError::Stopped),
    }
}

async fn calibration(State(state): State<AppState>) -> Response {
    query(&state, Request::Calibration).await
}

async fn trial(State(state): State<AppState>) -> Response {
    query(&state, Request::Trial).await
}

async fn latest_frame(State(state): State<AppState>) -> Response {
    let latest = state.frames.borrow().clone();
    match latest {
        Some(text) => (
            [(header::CONTENT_TYPE, "application/json")],
            text.to_string(),
        )
            .into_response(),
        None => error_response(&CommandError::Stopped),
    }
}

async fn ws_upgrade(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_frames(socket, state))
}

/// Pushes every new frame until the client goes away or the service stops.
/// Frames the client is too slow for are skipped, never queued.
async fn stream_frames(mut socket: WebSocket, mut state: AppState) {
    state.frames.mark_changed();
    loop {
        tokio::select! {
            changed = state.frames.changed() => {
                if changed.is_err() {
                    break;
                }
                let frame = state.frames.borrow_and_update().clone();
                if let Some(text) = frame {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            _ = stopped(&mut state.shutdown) => break,
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
