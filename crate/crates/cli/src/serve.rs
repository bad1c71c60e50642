//! Live channel: one session, any number of WebSocket clients at `/ws`.
//!
//! Every client receives every LiveMessage as a JSON text frame. Text
//! frames from clients are parsed as commands and queued to the session in
//! arrival order.

use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::sync::mpsc;

use anyhow::{anyhow, Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::sync::{broadcast, watch};

use chinpoint_core::agent::AgentParams;
use chinpoint_core::session::{run_session, ClientCommand, LiveMessage, SessionConfig, Source};
use chinpoint_core::task::{PointingConfig, TaskSetup};

use crate::config::Config;
use crate::ServeArgs;

const LIVE_BUFFER: usize = 4096;

#[derive(Clone)]
struct AppState {
    live: broadcast::Sender<String>,
    commands: mpsc::Sender<ClientCommand>,
    clients: watch::Sender<usize>,
    close_on_end: bool,
}

fn default_session(cfg: &Config) -> SessionConfig {
    SessionConfig {
        session_id: "live".into(),
        participant: None,
        cohort: None,
        setup: TaskSetup::Pointing(PointingConfig::default()),
        source: Source::SensorAgent {
            params: AgentParams::default(),
            rate_hz: 100,
        },
        profile: cfg.profile.clone(),
        realtime: true,
    }
}

pub fn run(cfg: &Config, a: ServeArgs) -> Result<()> {
    let mut session = match &a.session {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            // A session file may leave the profile to the config dir.
            if let Some(obj) = value.as_object_mut() {
                if !obj.contains_key("profile") {
                    obj.insert("profile".into(), serde_json::to_value(&cfg.profile)?);
                }
            }
            serde_json::from_value::<SessionConfig>(value)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => default_session(cfg),
    };
    if a.fast {
        session.realtime = false;
    }
    session.validate()?;
    tokio::runtime::Runtime::new()?.block_on(serve(session, a))
}

async fn serve(session: SessionConfig, a: ServeArgs) -> Result<()> {
    let (live_tx, _) = broadcast::channel::<String>(LIVE_BUFFER);
    let (cmd_tx, cmd_rx) = mpsc::channel();
    let (clients_tx, mut clients_rx) = watch::channel(0usize);
    let state = AppState {
        live: live_tx.clone(),
        commands: cmd_tx,
        clients: clients_tx,
        close_on_end: a.exit_on_end,
    };
    let app = Router::new()
        .route("/ws", get(ws_handler))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state);

    let listener = tokio::net::TcpListener::bind((a.bind.as_str(), a.port))
        .await
        .with_context(|| format!("binding {}:{}", a.bind, a.port))?;
    let addr: SocketAddr = listener.local_addr()?;
    eprintln!("listening on ws://{addr}/ws");

    let (done_tx, mut done_rx) = watch::channel(false);
    let exit_on_end = a.exit_on_end;
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let ended = async {
                    if exit_on_end {
                        let _ = done_rx.wait_for(|&d| d).await;
                    } else {
                        std::future::pending::<()>().await;
                    }
                };
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = ended => {}
                }
            })
            .await
    });

    if a.wait_client {
        clients_rx.wait_for(|&n| n > 0).await?;
    }
    let log_path = a.log.clone();
    let pipeline = tokio::task::spawn_blocking(move || -> Result<_> {
        if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let out = BufWriter::new(
            File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
        );
        let mut sink = |m: LiveMessage| {
            // No subscribers is fine; the log is the record.
            let _ = live_tx.send(serde_json::to_string(&m).expect("live messages serialize"));
        };
        let (_, summary) = run_session(&session, out, &mut sink, Some(&cmd_rx))?;
        Ok(summary)
    });

    let summary = pipeline
        .await
        .map_err(|e| anyhow!("session thread failed: {e}"))??;
    eprintln!(
        "session {} ended: {:?}, {} trials, log {}",
        summary.session_id,
        summary.reason,
        summary.trials,
        a.log.display()
    );
    let _ = done_tx.send(true);
    server.await??;
    Ok(())
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(mut socket: WebSocket, state: AppState) {
    let mut live = state.live.subscribe();
    state.clients.send_modify(|n| *n += 1);
    loop {
        tokio::select! {
            msg = live.recv() => match msg {
                Ok(text) => {
                    let end = text.starts_with(r#"{"type":"session_end""#);
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                    if end && state.close_on_end {
                        let _ = socket.send(Message::Close(None)).await;
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => eprintln!("client fell behind, {n} messages skipped"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientCommand>(&text) {
                    Ok(cmd) => {
                        if state.commands.send(cmd).is_err() {
                            eprintln!("session has ended; command dropped");
                        }
                    }
                    Err(e) => eprintln!("ignoring malformed command: {e}"),
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    state.clients.send_modify(|n| *n -= 1);
}
