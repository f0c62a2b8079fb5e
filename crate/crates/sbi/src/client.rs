//! Controller-side session to one device speaking the unified protocol.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tracing::{debug, warn};

use crate::unified::*;

pub const DEFAULT_RPC_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SbiError {
    #[error("cannot connect to {addr}: {reason}")]
    Connect { addr: String, reason: String },
    #[error("rpc timed out after {0:?}")]
    Timeout(Duration),
    #[error("rpc-error: {0}")]
    Rpc(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("session closed")]
    Closed,
}

/// Something a device pushed to the controller outside of an RPC reply.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Notification {
        device: String,
        notification: Notification,
    },
    /// The transport dropped; no notifications arrive until it is re-established.
    Lost { device: String },
}

pub type EventSink = mpsc::UnboundedSender<SessionEvent>;

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<ServerFrame>>>>;

struct Waiter {
    rpc_id: u64,
    rx: oneshot::Receiver<ServerFrame>,
    pending: Pending,
    alive: Arc<AtomicBool>,
}

struct Conn {
    writer: OwnedWriteHalf,
    pending: Pending,
    alive: Arc<AtomicBool>,
    reader: JoinHandle<()>,
}

impl Drop for Conn {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

/// One session per device. RPCs are issued strictly one after another.
pub struct SbiSession {
    device: String,
    addr: String,
    timeout: Duration,
    next_id: AtomicU64,
    conn: tokio::sync::Mutex<Option<Conn>>,
    sink: Arc<Mutex<Option<EventSink>>>,
}

impl std::fmt::Debug for SbiSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SbiSession")
            .field("device", &self.device)
            .field("addr", &self.addr)
            .finish()
    }
}

impl SbiSession {
    pub fn new(device: impl Into<String>, addr: impl Into<String>, timeout: Duration) -> Self {
        SbiSession {
            device: device.into(),
            addr: addr.into(),
            timeout,
            next_id: AtomicU64::new(1),
            conn: tokio::sync::Mutex::new(None),
            sink: Arc::new(Mutex::new(None)),
        }
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    async fn connect(&self) -> Result<Conn, SbiError> {
        let stream = tokio::time::timeout(self.timeout, TcpStream::connect(&self.addr))
            .await
            .map_err(|_| SbiError::Timeout(self.timeout))?
            .map_err(|e| SbiError::Connect {
                addr: self.addr.clone(),
                reason: e.to_string(),
            })?;
        let _ = stream.set_nodelay(true);
        let (rd, writer) = stream.into_split();
        let pending: Pending = Arc::default();
        let alive = Arc::new(AtomicBool::new(true));
        let reader = tokio::spawn(read_loop(
            self.device.clone(),
            BufReader::new(rd),
            pending.clone(),
            alive.clone(),
            self.sink.clone(),
        ));
        Ok(Conn {
            writer,
            pending,
            alive,
            reader,
        })
    }

    /// Writes one request; the reply arrives on the returned receiver.
    async fn send(&self, conn: &mut Conn, rpc: &str, payload: Option<EditPayload>) -> Result<Waiter, SbiError> {
        let rpc_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let req = Request {
            rpc_id,
            rpc: rpc.to_string(),
            payload,
        };
        let mut line = serde_json::to_string(&req).expect("request serializes");
        line.push('\n');
        let (tx, rx) = oneshot::channel();
        conn.pending.lock().unwrap().insert(rpc_id, tx);
        if let Err(e) = conn.writer.write_all(line.as_bytes()).await {
            conn.pending.lock().unwrap().remove(&rpc_id);
            conn.alive.store(false, Ordering::SeqCst);
            return Err(SbiError::Connect {
                addr: self.addr.clone(),
                reason: e.to_string(),
            });
        }
        Ok(Waiter {
            rpc_id,
            rx,
            pending: conn.pending.clone(),
            alive: conn.alive.clone(),
        })
    }

    async fn wait(&self, w: Waiter) -> Result<Value, SbiError> {
        match tokio::time::timeout(self.timeout, w.rx).await {
            Err(_) => {
                w.pending.lock().unwrap().remove(&w.rpc_id);
                Err(SbiError::Timeout(self.timeout))
            }
            Ok(Err(_)) => {
                w.alive.store(false, Ordering::SeqCst);
                Err(SbiError::Closed)
            }
            Ok(Ok(ServerFrame::Reply { reply, .. })) => Ok(reply),
            Ok(Ok(ServerFrame::Error { error, .. })) => Err(SbiError::Rpc(error.message)),
            Ok(Ok(ServerFrame::Notification(_))) => {
                Err(SbiError::Protocol("notification routed as reply".into()))
            }
        }
    }

    /// Issues one RPC, (re)connecting first when needed. Requests share the
    /// connection; only writing one holds it.
    pub async fn call(&self, rpc: &str, payload: Option<EditPayload>) -> Result<Value, SbiError> {
        let waiter = {
            let mut guard = self.conn.lock().await;
            if guard.as_ref().is_none_or(|c| !c.alive.load(Ordering::SeqCst)) {
                *guard = None;
                let mut conn = self.connect().await?;
                let subscribed = self.sink.lock().unwrap().is_some();
                if subscribed && rpc != RPC_SUBSCRIBE {
                    let w = self.send(&mut conn, RPC_SUBSCRIBE, None).await?;
                    self.wait(w).await?;
                }
                *guard = Some(conn);
            }
            let conn = guard.as_mut().expect("connected above");
            match self.send(conn, rpc, payload).await {
                Ok(w) => w,
                Err(e) => {
                    *guard = None;
                    return Err(e);
                }
            }
        };
        self.wait(waiter).await
    }

    pub async fn edit_config(&self, payload: EditPayload) -> Result<(), SbiError> {
        self.call(RPC_EDIT_CONFIG, Some(payload)).await.map(|_| ())
    }

    pub async fn get_state(&self) -> Result<StateReply, SbiError> {
        let v = self.call(RPC_GET, None).await?;
        serde_json::from_value(v).map_err(|e| SbiError::Protocol(e.to_string()))
    }

    pub async fn get_config(&self) -> Result<Vec<ocs_model::InternalConnection>, SbiError> {
        let v = self.call(RPC_GET_CONFIG, None).await?;
        let state: StateReply =
            serde_json::from_value(v).map_err(|e| SbiError::Protocol(e.to_string()))?;
        Ok(state.connections)
    }

    pub async fn hello(&self) -> Result<(), SbiError> {
        self.call(RPC_HELLO, None).await.map(|_| ())
    }

    pub async fn configure_monitor(
        &self,
        port: &str,
        enabled: bool,
        wavelength: Option<f64>,
    ) -> Result<(), SbiError> {
        self.edit_config(EditPayload {
            monitor: vec![MonitorConfig {
                port: port.to_string(),
                enabled,
                wavelength,
            }],
            ..Default::default()
        })
        .await
    }

    pub async fn configure_alarm(
        &self,
        port: &str,
        high: Option<f64>,
        low: Option<f64>,
    ) -> Result<(), SbiError> {
        self.edit_config(EditPayload {
            alarm: vec![AlarmConfig {
                port: port.to_string(),
                high,
                low,
            }],
            ..Default::default()
        })
        .await
    }

    /// Routes this device's notifications to `sink`. The subscription is
    /// renewed automatically whenever the session reconnects.
    pub async fn subscribe(&self, sink: EventSink) -> Result<(), SbiError> {
        *self.sink.lock().unwrap() = Some(sink);
        self.call(RPC_SUBSCRIBE, None).await.map(|_| ())
    }

    pub async fn unsubscribe(&self) -> Result<(), SbiError> {
        *self.sink.lock().unwrap() = None;
        self.call(RPC_UNSUBSCRIBE, None).await.map(|_| ())
    }

    pub async fn close(&self) {
        *self.sink.lock().unwrap() = None;
        *self.conn.lock().await = None;
    }
}

async fn read_loop(
    device: String,
    mut rd: BufReader<tokio::net::tcp::OwnedReadHalf>,
    pending: Pending,
    alive: Arc<AtomicBool>,
    sink: Arc<Mutex<Option<EventSink>>>,
) {
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
        match ServerFrame::decode(text) {
            Ok(ServerFrame::Notification(n)) => {
                if let Some(s) = sink.lock().unwrap().as_ref() {
                    let _ = s.send(SessionEvent::Notification {
                        device: device.clone(),
                        notification: n,
                    });
                }
            }
            Ok(frame) => {
                let id = match &frame {
                    ServerFrame::Reply { rpc_id, .. } | ServerFrame::Error { rpc_id, .. } => *rpc_id,
                    ServerFrame::Notification(_) => unreachable!(),
                };
                match pending.lock().unwrap().remove(&id) {
                    Some(tx) => {
                        let _ = tx.send(frame);
                    }
                    None => debug!(%device, id, "late reply dropped"),
                }
            }
            Err(e) => warn!(%device, "undecodable frame: {e}"),
        }
    }
    alive.store(false, Ordering::SeqCst);
    pending.lock().unwrap().clear();
    if let Some(s) = sink.lock().unwrap().as_ref() {
        let _ = s.send(SessionEvent::Lost { device });
    }
}
