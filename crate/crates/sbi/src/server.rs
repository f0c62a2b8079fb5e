//! Device side of the unified protocol, shared by translators and
//! emulated terminals.

use std::net::SocketAddr;
use std::sync::Arc;

use async_trait::async_trait;
use ocs_model::InternalConnection;
use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::{AbortHandle, JoinSet};
use tracing::{debug, warn};

use crate::unified::*;

#[async_trait]
pub trait UnifiedDevice: Send + Sync + 'static {
    async fn edit_config(&self, payload: EditPayload) -> Result<(), String>;
    async fn get_state(&self) -> Result<StateReply, String>;
    async fn get_config(&self) -> Result<Vec<InternalConnection>, String>;
    async fn hello(&self) -> Result<(), String>;
    fn notifications(&self) -> broadcast::Receiver<Notification>;
}

/// A running unified-protocol listener. Dropping it stops the listener and
/// every open session.
pub struct ServerHandle {
    addr: SocketAddr,
    task: AbortHandle,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&self) {
        self.task.abort();
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub fn serve(listener: TcpListener, device: Arc<dyn UnifiedDevice>) -> ServerHandle {
    let addr = listener.local_addr().expect("bound listener has an address");
    let task = tokio::spawn(async move {
        let mut sessions = JoinSet::new();
        loop {
            tokio::select! {
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        debug!(%addr, %peer, "unified session opened");
                        sessions.spawn(session(stream, device.clone()));
                    }
                    Err(e) => warn!(%addr, "accept failed: {e}"),
                },
                Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            }
        }
    });
    ServerHandle {
        addr,
        task: task.abort_handle(),
    }
}

async fn session(stream: TcpStream, device: Arc<dyn UnifiedDevice>) {
    let _ = stream.set_nodelay(true);
    let (rd, mut wr) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let mut tasks = JoinSet::new();
    tasks.spawn(async move {
        while let Some(mut line) = out_rx.recv().await {
            line.push('\n');
            if wr.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
    });
    let mut forwarder: Option<AbortHandle> = None;
    let mut rd = BufReader::new(rd);
    let mut line = String::new();
    loop {
        line.clear();
        match rd.read_line(&mut line).await {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<Value>(text)
                    .ok()
                    .and_then(|v| v.get("rpc-id").and_then(Value::as_u64))
                    .unwrap_or(0);
                let _ = out_tx.send(ServerFrame::rpc_error(id, format!("malformed request: {e}")).encode());
                continue;
            }
        };
        let id = req.rpc_id;
        let frame = match req.rpc.as_str() {
            RPC_EDIT_CONFIG | RPC_GET | RPC_GET_CONFIG | RPC_HELLO => {
                // device calls run side by side so edits can be batched
                let (device, tx) = (device.clone(), out_tx.clone());
                tokio::spawn(async move {
                    let _ = tx.send(device_call(device.as_ref(), req).await.encode());
                });
                continue;
            }
            RPC_SUBSCRIBE => {
                if forwarder.is_none() {
                    let mut rx = device.notifications();
                    let tx = out_tx.clone();
                    forwarder = Some(tasks.spawn(async move {
                        loop {
                            match rx.recv().await {
                                Ok(n) => {
                                    if tx.send(ServerFrame::Notification(n).encode()).is_err() {
                                        break;
                                    }
                                }
                                Err(broadcast::error::RecvError::Lagged(k)) => {
                                    warn!("subscriber lagged, {k} notifications lost");
                                }
                                Err(broadcast::error::RecvError::Closed) => break,
                            }
                        }
                    }));
                }
                ServerFrame::ok(id)
            }
            RPC_UNSUBSCRIBE => {
                if let Some(f) = forwarder.take() {
                    f.abort();
                }
                ServerFrame::ok(id)
            }
            other => ServerFrame::rpc_error(id, format!("unknown rpc {other:?}")),
        };
        if out_tx.send(frame.encode()).is_err() {
            break;
        }
    }
}

async fn device_call(device: &dyn UnifiedDevice, req: Request) -> ServerFrame {
    let id = req.rpc_id;
    match req.rpc.as_str() {
        RPC_EDIT_CONFIG => match device.edit_config(req.payload.unwrap_or_default()).await {
            Ok(()) => ServerFrame::ok(id),
            Err(e) => ServerFrame::rpc_error(id, e),
        },
        RPC_GET => match device.get_state().await {
            Ok(s) => ServerFrame::Reply {
                rpc_id: id,
                reply: serde_json::to_value(s).expect("state serializes"),
            },
            Err(e) => ServerFrame::rpc_error(id, e),
        },
        RPC_GET_CONFIG => match device.get_config().await {
            Ok(c) => ServerFrame::Reply {
                rpc_id: id,
                reply: serde_json::to_value(StateReply {
                    connections: c,
                    power: Vec::new(),
                })
                .expect("config serializes"),
            },
            Err(e) => ServerFrame::rpc_error(id, e),
        },
        _ => match device.hello().await {
            Ok(()) => ServerFrame::ok(id),
            Err(e) => ServerFrame::rpc_error(id, e),
        },
    }
}
