//! Frames of the unified southbound protocol: newline-delimited JSON over
//! TCP, one object per line.

use std::time::{SystemTime, UNIX_EPOCH};

use ocs_model::{ConfigPayload, InternalConnection};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const RPC_EDIT_CONFIG: &str = "edit-config";
pub const RPC_GET: &str = "get";
pub const RPC_GET_CONFIG: &str = "get-config";
pub const RPC_SUBSCRIBE: &str = "subscribe";
pub const RPC_UNSUBSCRIBE: &str = "unsubscribe";
pub const RPC_HELLO: &str = "hello";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub port: String,
    pub enabled: bool,
    #[serde(default)]
    pub wavelength: Option<f64>,
}

/// Threshold settings for one port. `None` leaves the current value alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmConfig {
    pub port: String,
    #[serde(default)]
    pub high: Option<f64>,
    #[serde(default)]
    pub low: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditPayload {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub create: Vec<InternalConnection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delete: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monitor: Vec<MonitorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alarm: Vec<AlarmConfig>,
}

impl EditPayload {
    pub fn is_empty(&self) -> bool {
        self.create.is_empty()
            && self.delete.is_empty()
            && self.monitor.is_empty()
            && self.alarm.is_empty()
    }
}

impl From<&ConfigPayload> for EditPayload {
    fn from(p: &ConfigPayload) -> Self {
        EditPayload {
            create: p.connections_to_create.clone(),
            delete: p.connections_to_delete.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(rename = "rpc-id")]
    pub rpc_id: u64,
    pub rpc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<EditPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReading {
    pub port: String,
    pub dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
}

/// Operational state returned by `get`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateReply {
    pub connections: Vec<InternalConnection>,
    #[serde(default)]
    pub power: Vec<PowerReading>,
}

impl StateReply {
    pub fn power_of(&self, port: &str) -> Option<f64> {
        self.power.iter().find(|p| p.port == port).map(|p| p.dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlarmKind {
    SignalDetected,
    SignalDegraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub port: String,
    pub kind: AlarmKind,
    pub dbm: f64,
    pub ts: f64,
}

impl Notification {
    pub fn now(port: impl Into<String>, kind: AlarmKind, dbm: f64) -> Self {
        Notification {
            port: port.into(),
            kind,
            dbm,
            ts: unix_now(),
        }
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcErrorBody {
    pub code: String,
    pub message: String,
}

/// Any frame a server may send.
#[derive(Debug, Clone, PartialEq)]
pub enum ServerFrame {
    Reply { rpc_id: u64, reply: Value },
    Error { rpc_id: u64, error: RpcErrorBody },
    Notification(Notification),
}

impl ServerFrame {
    pub fn ok(rpc_id: u64) -> Self {
        ServerFrame::Reply {
            rpc_id,
            reply: Value::String("ok".into()),
        }
    }

    pub fn rpc_error(rpc_id: u64, message: impl Into<String>) -> Self {
        ServerFrame::Error {
            rpc_id,
            error: RpcErrorBody {
                code: "rpc-error".into(),
                message: message.into(),
            },
        }
    }

    pub fn encode(&self) -> String {
        #[derive(Serialize)]
        struct ReplyOut<'a> {
            #[serde(rename = "rpc-id")]
            rpc_id: u64,
            reply: &'a Value,
        }
        #[derive(Serialize)]
        struct ErrorOut<'a> {
            #[serde(rename = "rpc-id")]
            rpc_id: u64,
            error: &'a RpcErrorBody,
        }
        #[derive(Serialize)]
        struct NotificationOut<'a> {
            notification: &'a Notification,
        }
        let out = match self {
            ServerFrame::Reply { rpc_id, reply } => serde_json::to_string(&ReplyOut {
                rpc_id: *rpc_id,
                reply,
            }),
            ServerFrame::Error { rpc_id, error } => serde_json::to_string(&ErrorOut {
                rpc_id: *rpc_id,
                error,
            }),
            ServerFrame::Notification(n) => {
                serde_json::to_string(&NotificationOut { notification: n })
            }
        };
        out.expect("frames serialize")
    }

    pub fn decode(line: &str) -> Result<ServerFrame, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if let Some(n) = v.get("notification") {
            return serde_json::from_value(n.clone())
                .map(ServerFrame::Notification)
                .map_err(|e| e.to_string());
        }
        let rpc_id = v
            .get("rpc-id")
            .and_then(Value::as_u64)
            .ok_or_else(|| format!("frame without rpc-id: {line}"))?;
        if let Some(err) = v.get("error") {
            let error = serde_json::from_value(err.clone()).map_err(|e| e.to_string())?;
            return Ok(ServerFrame::Error { rpc_id, error });
        }
        let reply = v
            .get("reply")
            .cloned()
            .ok_or_else(|| format!("frame without reply: {line}"))?;
        Ok(ServerFrame::Reply { rpc_id, reply })
    }
}
