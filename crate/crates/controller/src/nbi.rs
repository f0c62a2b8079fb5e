//! Northbound wire protocol: newline-delimited JSON request/response frames.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ocs_model::{ErrorCode, FiberPath, NbiError};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tracing::debug;

use crate::api::{self, PathParams};
use crate::core::Controller;

pub struct NbiServer {
    addr: SocketAddr,
    task: JoinHandle<()>,
}

impl NbiServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(&self) {
        self.task.abort();
    }
}

impl Drop for NbiServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

fn error_frame(id: Value, e: &NbiError) -> Value {
    json!({"id": id, "error": {"code": e.code, "message": e.message}})
}

async fn answer(ctl: &Controller, line: &str) -> Value {
    let frame: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => {
            return error_frame(Value::Null, &NbiError::invalid_range(format!("malformed frame: {e}")));
        }
    };
    let id = frame.get("id").cloned().unwrap_or(Value::Null);
    let Some(method) = frame.get("method").and_then(Value::as_str) else {
        return error_frame(id, &NbiError::invalid_range("frame has no method"));
    };
    let params = frame.get("params").cloned().unwrap_or_else(|| json!({}));
    match ctl.handle(method, params).await {
        Ok(result) => json!({"id": id, "result": result}),
        Err(e) => error_frame(id, &e),
    }
}

async fn serve_conn(ctl: Arc<Controller>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let (rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(mut line) = rx.recv().await {
            line.push('\n');
            if wr.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
    });
    let mut lines = BufReader::new(rd).lines();
    while let Ok(Some(line)) = lines.next_line().await {
        if line.trim().is_empty() {
            continue;
        }
        let (ctl, tx) = (ctl.clone(), tx.clone());
        tokio::spawn(async move {
            let out = answer(&ctl, &line).await;
            let _ = tx.send(out.to_string());
        });
    }
    drop(tx);
    let _ = writer.await;
}

/// Serves the northbound protocol until the returned handle is dropped.
pub fn serve(listener: TcpListener, ctl: Arc<Controller>) -> std::io::Result<NbiServer> {
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        loop {
            let Ok((stream, peer)) = listener.accept().await else { continue };
            debug!(%peer, "northbound client connected");
            tokio::spawn(serve_conn(ctl.clone(), stream));
        }
    });
    Ok(NbiServer { addr, task })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("{0}")]
    Nbi(NbiError),
    #[error("cannot reach controller: {0}")]
    Transport(String),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Nbi(e) => Some(e.code),
            _ => None,
        }
    }
}

type Waiters = Arc<Mutex<HashMap<u64, oneshot::Sender<Value>>>>;

/// Northbound client; requests may be issued concurrently.
pub struct NbiClient {
    writer: tokio::sync::Mutex<OwnedWriteHalf>,
    waiters: Waiters,
    next: AtomicU64,
    timeout: Duration,
    reader: JoinHandle<()>,
}

impl Drop for NbiClient {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

impl NbiClient {
    pub async fn connect(addr: &str, timeout: Duration) -> Result<NbiClient, ClientError> {
        let stream = tokio::time::timeout(timeout, TcpStream::connect(addr))
            .await
            .map_err(|_| ClientError::Timeout(timeout))?
            .map_err(|e| ClientError::Transport(format!("{addr}: {e}")))?;
        let _ = stream.set_nodelay(true);
        let (rd, wr) = stream.into_split();
        let waiters: Waiters = Arc::default();
        let w = waiters.clone();
        let reader = tokio::spawn(async move {
            let mut lines = BufReader::new(rd).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                let Ok(v) = serde_json::from_str::<Value>(&line) else { continue };
                let Some(id) = v.get("id").and_then(Value::as_u64) else { continue };
                if let Some(tx) = w.lock().unwrap().remove(&id) {
                    let _ = tx.send(v);
                }
            }
            w.lock().unwrap().clear();
        });
        Ok(NbiClient {
            writer: tokio::sync::Mutex::new(wr),
            waiters,
            next: AtomicU64::new(1),
            timeout,
            reader,
        })
    }

    pub async fn call(&self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = oneshot::channel();
        self.waiters.lock().unwrap().insert(id, tx);
        let mut line = json!({"id": id, "method": method, "params": params}).to_string();
        line.push('\n');
        if let Err(e) = self.writer.lock().await.write_all(line.as_bytes()).await {
            self.waiters.lock().unwrap().remove(&id);
            return Err(ClientError::Transport(e.to_string()));
        }
        let frame = match tokio::time::timeout(self.timeout, rx).await {
            Err(_) => {
                self.waiters.lock().unwrap().remove(&id);
                return Err(ClientError::Timeout(self.timeout));
            }
            Ok(Err(_)) => return Err(ClientError::Transport("connection closed".into())),
            Ok(Ok(v)) => v,
        };
        if let Some(r) = frame.get("result") {
            return Ok(r.clone());
        }
        let err = frame
            .get("error")
            .cloned()
            .and_then(|e| serde_json::from_value::<NbiError>(e).ok())
            .ok_or_else(|| ClientError::Transport(format!("unexpected frame {frame}")))?;
        Err(ClientError::Nbi(err))
    }

    async fn typed<T: serde::Serialize>(&self, method: &str, params: &T) -> Result<Value, ClientError> {
        self.call(method, serde_json::to_value(params).expect("params serialize")).await
    }

    fn path(v: Value) -> Result<FiberPath, ClientError> {
        serde_json::from_value(v).map_err(|e| ClientError::Transport(format!("bad path summary: {e}")))
    }

    pub async fn create_fiber_path(&self, p: &PathParams) -> Result<FiberPath, ClientError> {
        Self::path(self.typed(api::CREATE_FIBER_PATH, p).await?)
    }

    pub async fn restore_fiber_path(&self, p: &PathParams) -> Result<FiberPath, ClientError> {
        Self::path(self.typed(api::RESTORE_FIBER_PATH, p).await?)
    }

    pub async fn delete_fiber_path(&self, svc_id: &str) -> Result<(), ClientError> {
        self.typed(api::DELETE_FIBER_PATH, &api::SvcId { svc_id: svc_id.into() })
            .await
            .map(|_| ())
    }
}
