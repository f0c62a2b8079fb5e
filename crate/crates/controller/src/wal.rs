//! Write-ahead log of controller state.
//!
//! Every change is appended as one JSON line and synced before the NBI call
//! that caused it is answered. Replaying the lines in order rebuilds the
//! resource store, events, actions and handlers exactly.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use ocs_model::{
    FiberLink, FiberPath, NbiError, ObjectType, OcsNode, ResourceStatus, ResourceStore, Terminal,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::events::{ActionSpec, EventSpec, HandlerBinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Resource,
    Path,
    Event,
    Action,
    Handler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordOp {
    Put,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistentRecord {
    pub seq: u64,
    pub kind: RecordKind,
    pub op: RecordOp,
    pub body: Value,
}

/// Body of a RESOURCE record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceBody {
    Switch(OcsNode),
    Terminal(Terminal),
    Link(FiberLink),
    Status {
        object_id: String,
        object_type: ObjectType,
        status: ResourceStatus,
    },
}

/// Everything the log can rebuild.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DurableState {
    pub store: ResourceStore,
    pub events: BTreeMap<String, EventSpec>,
    pub actions: BTreeMap<String, ActionSpec>,
    pub handlers: Vec<HandlerBinding>,
}

impl DurableState {
    pub fn apply(&mut self, rec: &PersistentRecord) -> Result<(), String> {
        let bad = |e: serde_json::Error| format!("record {}: {e}", rec.seq);
        let nbi = |e: NbiError| format!("record {}: {e}", rec.seq);
        match (rec.kind, rec.op) {
            (RecordKind::Resource, RecordOp::Put) => {
                match serde_json::from_value::<ResourceBody>(rec.body.clone()).map_err(bad)? {
                    ResourceBody::Switch(n) => {
                        let status = n.status;
                        let id = n.id.clone();
                        self.store.register_switch(n).map_err(nbi)?;
                        self.store.update_status(&id, ObjectType::Switch, status).map_err(nbi)?;
                    }
                    ResourceBody::Terminal(t) => {
                        let status = t.status;
                        let id = t.id.clone();
                        self.store.register_terminal(t).map_err(nbi)?;
                        self.store.update_status(&id, ObjectType::Terminal, status).map_err(nbi)?;
                    }
                    ResourceBody::Link(l) => {
                        let status = l.status;
                        let id = l.id.clone();
                        self.store.register_link(l).map_err(nbi)?;
                        self.store.update_status(&id, ObjectType::Link, status).map_err(nbi)?;
                    }
                    ResourceBody::Status {
                        object_id,
                        object_type,
                        status,
                    } => self
                        .store
                        .update_status(&object_id, object_type, status)
                        .map_err(nbi)?,
                }
            }
            (RecordKind::Path, RecordOp::Put) => {
                let p: FiberPath = serde_json::from_value(rec.body.clone()).map_err(bad)?;
                if self.store.path(&p.svc_id).is_some() {
                    self.store.release_path(&p.svc_id).map_err(nbi)?;
                }
                self.store.restore_path(p).map_err(nbi)?;
            }
            (RecordKind::Path, RecordOp::Delete) => {
                let id = key(&rec.body, "svc_id", rec.seq)?;
                self.store.release_path(&id).map_err(nbi)?;
            }
            (RecordKind::Event, RecordOp::Put) => {
                let e: EventSpec = serde_json::from_value(rec.body.clone()).map_err(bad)?;
                self.events.insert(e.event_id.clone(), e);
            }
            (RecordKind::Event, RecordOp::Delete) => {
                self.events.remove(&key(&rec.body, "event_id", rec.seq)?);
            }
            (RecordKind::Action, RecordOp::Put) => {
                let a: ActionSpec = serde_json::from_value(rec.body.clone()).map_err(bad)?;
                self.actions.insert(a.act_id.clone(), a);
            }
            (RecordKind::Action, RecordOp::Delete) => {
                self.actions.remove(&key(&rec.body, "act_id", rec.seq)?);
            }
            (RecordKind::Handler, op) => {
                let h: HandlerBinding = serde_json::from_value(rec.body.clone()).map_err(bad)?;
                self.handlers.retain(|x| x != &h);
                if op == RecordOp::Put {
                    self.handlers.push(h);
                }
            }
            (RecordKind::Resource, RecordOp::Delete) => {
                return Err(format!("record {}: resources are never deleted", rec.seq));
            }
        }
        Ok(())
    }

    /// The shortest record sequence that rebuilds this state.
    pub fn to_records(&self) -> Vec<(RecordKind, RecordOp, Value)> {
        let mut out = Vec::new();
        let res = |b: ResourceBody| (RecordKind::Resource, RecordOp::Put, serde_json::to_value(b).unwrap());
        for n in self.store.nodes() {
            out.push(res(ResourceBody::Switch(n.clone())));
        }
        for t in self.store.terminals() {
            out.push(res(ResourceBody::Terminal(t.clone())));
        }
        for l in self.store.links() {
            out.push(res(ResourceBody::Link(l.clone())));
        }
        for (ocs, port) in self.store.unavailable_ports() {
            out.push(res(ResourceBody::Status {
                object_id: format!("{ocs}/{port}"),
                object_type: ObjectType::Port,
                status: ResourceStatus::Unavailable,
            }));
        }
        for p in self.store.paths() {
            out.push((RecordKind::Path, RecordOp::Put, serde_json::to_value(p).unwrap()));
        }
        for e in self.events.values() {
            out.push((RecordKind::Event, RecordOp::Put, serde_json::to_value(e).unwrap()));
        }
        for a in self.actions.values() {
            out.push((RecordKind::Action, RecordOp::Put, serde_json::to_value(a).unwrap()));
        }
        for h in &self.handlers {
            out.push((RecordKind::Handler, RecordOp::Put, serde_json::to_value(h).unwrap()));
        }
        out
    }
}

fn key(body: &Value, k: &str, seq: u64) -> Result<String, String> {
    body.get(k)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| format!("record {seq}: missing {k}"))
}

struct Inner {
    file: Option<File>,
    next_seq: u64,
}

pub struct Wal {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
    fail: AtomicBool,
}

impl Wal {
    /// A log that keeps nothing; for tests and throwaway controllers.
    pub fn ephemeral() -> Wal {
        Wal {
            path: None,
            inner: Mutex::new(Inner {
                file: None,
                next_seq: 1,
            }),
            fail: AtomicBool::new(false),
        }
    }

    /// Opens (creating if needed) the log at `path` and replays it. A torn
    /// final line, left by a crash mid-append, is ignored.
    pub fn open(path: &Path) -> std::io::Result<(Wal, DurableState)> {
        let (state, last) = Self::replay(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let wal = Wal {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                file: Some(file),
                next_seq: last + 1,
            }),
            fail: AtomicBool::new(false),
        };
        Ok((wal, state))
    }

    pub fn replay(path: &Path) -> std::io::Result<(DurableState, u64)> {
        let mut state = DurableState::default();
        let mut last = 0;
        let f = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((state, 0)),
            Err(e) => return Err(e),
        };
        let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>()?;
        let n = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: PersistentRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) if i + 1 == n => {
                    tracing::warn!("ignoring torn final log line: {e}");
                    break;
                }
                Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            };
            if rec.seq <= last {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("sequence went backwards at {}", rec.seq),
                ));
            }
            last = rec.seq;
            state
                .apply(&rec)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        }
        Ok((state, last))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Makes every later append fail, as a full or broken disk would.
    pub fn inject_failure(&self, on: bool) {
        self.fail.store(on, Ordering::SeqCst);
    }

    pub fn append(&self, kind: RecordKind, op: RecordOp, body: Value) -> Result<u64, NbiError> {
        self.append_batch(vec![(kind, op, body)])
    }

    /// Appends several records with one write and one sync. Returns the
    /// last sequence number used.
    pub fn append_batch(&self, records: Vec<(RecordKind, RecordOp, Value)>) -> Result<u64, NbiError> {
        if self.fail.load(Ordering::SeqCst) {
            return Err(NbiError::path_oper_failed("persistent store unavailable"));
        }
        let mut inner = self.inner.lock().unwrap();
        let mut seq = inner.next_seq;
        let mut text = String::new();
        for (kind, op, body) in records {
            let rec = PersistentRecord { seq, kind, op, body };
            text.push_str(&serde_json::to_string(&rec).expect("records serialize"));
            text.push('\n');
            seq += 1;
        }
        if let Some(f) = inner.file.as_mut() {
            f.write_all(text.as_bytes())
                .and_then(|_| f.sync_data())
                .map_err(|e| NbiError::path_oper_failed(format!("persistent store: {e}")))?;
        }
        inner.next_seq = seq;
        Ok(seq - 1)
    }

    /// Rewrites the log as the minimal record set for `state`.
    pub fn compact(&self, state: &DurableState) -> std::io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut inner = self.inner.lock().unwrap();
        let tmp = path.with_extension("compact");
        let mut f = File::create(&tmp)?;
        let mut seq = 0;
        for (kind, op, body) in state.to_records() {
            seq += 1;
            let rec = PersistentRecord { seq, kind, op, body };
            writeln!(f, "{}", serde_json::to_string(&rec).expect("records serialize"))?;
        }
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        inner.file = Some(OpenOptions::new().append(true).open(path)?);
        inner.next_seq = seq + 1;
        Ok(())
    }
}
