//! Per-device translator between the unified protocol and one vendor
//! protocol.
//!
//! A translator keeps a small datastore holding the unified configuration
//! (connections, monitors, thresholds). Every accepted edit is handed to the
//! device's [`Converter`], which turns it into vendor commands. Edits that
//! arrive together are pipelined as one batch over a single vendor
//! connection. If the vendor rejects any command of an edit, that edit's
//! applied commands are undone before its unified `rpc-error` is returned.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use ocs_model::{check_threshold, InternalConnection};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, Mutex};
use tokio::task::JoinHandle;
use tracing::{debug, warn};

use crate::server::{serve, ServerHandle, UnifiedDevice};
use crate::unified::*;
use crate::vendor::{Dialect, Level, Vendor, VendorCommand, VendorEvent, VendorReply};

/// Maps unified operations onto one vendor's command set.
pub trait Converter: Send + Sync {
    fn vendor(&self) -> Vendor;

    fn dialect(&self) -> &'static dyn Dialect {
        self.vendor().dialect()
    }

    /// Connection edits: deletions first so a name can be re-created in the
    /// same payload.
    fn translate_edit(&self, payload: &EditPayload) -> Vec<VendorCommand> {
        payload
            .delete
            .iter()
            .map(|n| VendorCommand::Disconnect(n.clone()))
            .chain(payload.create.iter().cloned().map(VendorCommand::Connect))
            .collect()
    }

    /// Queries whose replies make up the unified state leaf.
    fn translate_get(&self, monitored: &[String]) -> Vec<VendorCommand> {
        std::iter::once(VendorCommand::List)
            .chain(monitored.iter().cloned().map(VendorCommand::Power))
            .collect()
    }

    fn translate_alarm_setup(&self, alarm: &AlarmConfig) -> Vec<VendorCommand>;

    fn parse_vendor_notification(&self, line: &str) -> Option<Notification> {
        self.dialect().parse_event(line).map(event_to_notification)
    }
}

pub fn event_to_notification(ev: VendorEvent) -> Notification {
    let kind = match ev.level {
        Level::Hi => AlarmKind::SignalDetected,
        Level::Lo => AlarmKind::SignalDegraded,
    };
    Notification::now(ev.port, kind, ev.dbm)
}

/// Vendor A takes one threshold per command.
pub struct TextConverter;

impl Converter for TextConverter {
    fn vendor(&self) -> Vendor {
        Vendor::A
    }

    fn translate_alarm_setup(&self, alarm: &AlarmConfig) -> Vec<VendorCommand> {
        let hi = alarm.high.map(|v| VendorCommand::Alarm {
            port: alarm.port.clone(),
            hi: Some(v),
            lo: None,
        });
        let lo = alarm.low.map(|v| VendorCommand::Alarm {
            port: alarm.port.clone(),
            hi: None,
            lo: Some(v),
        });
        hi.into_iter().chain(lo).collect()
    }
}

pub struct JsonConverter;

impl Converter for JsonConverter {
    fn vendor(&self) -> Vendor {
        Vendor::B
    }

    fn translate_alarm_setup(&self, alarm: &AlarmConfig) -> Vec<VendorCommand> {
        if alarm.high.is_none() && alarm.low.is_none() {
            return Vec::new();
        }
        vec![VendorCommand::Alarm {
            port: alarm.port.clone(),
            hi: alarm.high,
            lo: alarm.low,
        }]
    }
}

pub struct PathConverter;

impl Converter for PathConverter {
    fn vendor(&self) -> Vendor {
        Vendor::C
    }

    fn translate_alarm_setup(&self, alarm: &AlarmConfig) -> Vec<VendorCommand> {
        if alarm.high.is_none() && alarm.low.is_none() {
            return Vec::new();
        }
        vec![VendorCommand::Alarm {
            port: alarm.port.clone(),
            hi: alarm.high,
            lo: alarm.low,
        }]
    }
}

pub fn converter_for(vendor: Vendor) -> Arc<dyn Converter> {
    match vendor {
        Vendor::A => Arc::new(TextConverter),
        Vendor::B => Arc::new(JsonConverter),
        Vendor::C => Arc::new(PathConverter),
    }
}

/// A raw connection speaking one vendor protocol. Asynchronous event lines
/// are split off the reply stream and published as unified notifications.
pub struct VendorClient {
    converter: Arc<dyn Converter>,
    writer: OwnedWriteHalf,
    replies: mpsc::UnboundedReceiver<String>,
    alive: Arc<AtomicBool>,
    reader: JoinHandle<()>,
}

impl Drop for VendorClient {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

impl VendorClient {
    pub async fn connect(
        addr: &str,
        converter: Arc<dyn Converter>,
        events: Option<broadcast::Sender<Notification>>,
        timeout: Duration,
    ) -> Result<VendorClient, String> {
        let stream = tokio::time::timeout(timeout, TcpStream::connect(addr))
            .await
            .map_err(|_| format!("vendor connect to {addr} timed out"))?
            .map_err(|e| format!("vendor connect to {addr}: {e}"))?;
        let _ = stream.set_nodelay(true);
        let (rd, writer) = stream.into_split();
        let (tx, replies) = mpsc::unbounded_channel();
        let alive = Arc::new(AtomicBool::new(true));
        let conv = converter.clone();
        let alive2 = alive.clone();
        let reader = tokio::spawn(async move {
            let mut rd = BufReader::new(rd);
            let mut line = String::new();
            loop {
                line.clear();
                match rd.read_line(&mut line).await {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {}
                }
                let text = line.trim_end_matches(['\r', '\n']);
                if let Some(n) = conv.parse_vendor_notification(text) {
                    if let Some(ev) = &events {
                        let _ = ev.send(n);
                    }
                } else if tx.send(text.to_string()).is_err() {
                    break;
                }
            }
            alive2.store(false, Ordering::SeqCst);
        });
        Ok(VendorClient {
            converter,
            writer,
            replies,
            alive,
            reader,
        })
    }

    pub fn is_alive(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }

    /// Sends every command back to back, then collects one reply per command.
    pub async fn exchange(
        &mut self,
        cmds: &[VendorCommand],
        timeout: Duration,
    ) -> Result<Vec<VendorReply>, String> {
        if cmds.is_empty() {
            return Ok(Vec::new());
        }
        let dialect = self.converter.dialect();
        let mut wire = String::new();
        for c in cmds {
            wire.push_str(&dialect.encode_command(c));
            wire.push('\n');
        }
        if let Err(e) = self.writer.write_all(wire.as_bytes()).await {
            self.alive.store(false, Ordering::SeqCst);
            return Err(format!("vendor write failed: {e}"));
        }
        let deadline = tokio::time::Instant::now() + timeout;
        let mut out = Vec::with_capacity(cmds.len());
        for c in cmds {
            let mut lines = Vec::new();
            while !dialect.reply_complete(&lines) {
                match tokio::time::timeout_at(deadline, self.replies.recv()).await {
                    Err(_) => {
                        self.alive.store(false, Ordering::SeqCst);
                        return Err("vendor timeout".into());
                    }
                    Ok(None) => {
                        self.alive.store(false, Ordering::SeqCst);
                        return Err("vendor disconnected".into());
                    }
                    Ok(Some(l)) => lines.push(l),
                }
            }
            out.push(dialect.decode_reply(c, &lines)?);
        }
        Ok(out)
    }
}

#[derive(Default)]
struct Datastore {
    config: BTreeMap<String, InternalConnection>,
    monitors: BTreeMap<String, MonitorConfig>,
    alarms: BTreeMap<String, (Option<f64>, Option<f64>)>,
    link: Option<VendorClient>,
}

pub struct Translator {
    converter: Arc<dyn Converter>,
    vendor_addr: String,
    timeout: Duration,
    store: Mutex<Datastore>,
    queue: std::sync::Mutex<Vec<Queued>>,
    readers: std::sync::Mutex<Vec<oneshot::Sender<Result<StateReply, String>>>>,
    events: broadcast::Sender<Notification>,
}

impl Translator {
    pub fn new(converter: Arc<dyn Converter>, vendor_addr: impl Into<String>, timeout: Duration) -> Self {
        let (events, _) = broadcast::channel(1024);
        Translator {
            converter,
            vendor_addr: vendor_addr.into(),
            timeout,
            store: Mutex::new(Datastore::default()),
            queue: std::sync::Mutex::default(),
            readers: std::sync::Mutex::default(),
            events,
        }
    }

    pub fn vendor(&self) -> Vendor {
        self.converter.vendor()
    }

    async fn link<'a>(&self, ds: &'a mut Datastore) -> Result<&'a mut VendorClient, String> {
        if ds.link.as_ref().is_none_or(|l| !l.is_alive()) {
            ds.link = None;
            let client = VendorClient::connect(
                &self.vendor_addr,
                self.converter.clone(),
                Some(self.events.clone()),
                self.timeout,
            )
            .await?;
            ds.link = Some(client);
        }
        Ok(ds.link.as_mut().expect("connected above"))
    }

    async fn exchange(&self, ds: &mut Datastore, cmds: &[VendorCommand]) -> Result<Vec<VendorReply>, String> {
        let timeout = self.timeout;
        let link = self.link(ds).await?;
        let out = link.exchange(cmds, timeout).await;
        if out.is_err() {
            ds.link = None;
        }
        out
    }

    fn inverse(ds: &Datastore, cmd: &VendorCommand, learned: &BTreeMap<String, InternalConnection>) -> Option<VendorCommand> {
        match cmd {
            VendorCommand::Connect(c) => Some(VendorCommand::Disconnect(c.name.clone())),
            VendorCommand::Disconnect(name) => ds
                .config
                .get(name)
                .or_else(|| learned.get(name))
                .cloned()
                .map(VendorCommand::Connect),
            _ => None,
        }
    }
}

/// An edit waiting for the next batch.
struct Queued {
    payload: EditPayload,
    done: oneshot::Sender<Result<(), String>>,
}

impl Translator {
    /// Validates one edit against the datastore plus the monitors enabled by
    /// edits ahead of it in the batch, and translates it.
    fn plan(&self, ds: &Datastore, enabled: &BTreeSet<String>, payload: &EditPayload) -> Result<Vec<VendorCommand>, String> {
        for a in &payload.alarm {
            for v in [a.high, a.low].into_iter().flatten() {
                check_threshold(v).map_err(|e| e.message)?;
            }
            let enabled_here = payload.monitor.iter().any(|m| m.port == a.port && m.enabled);
            let enabled_before = enabled.contains(&a.port) || ds.monitors.get(&a.port).is_some_and(|m| m.enabled);
            if !(enabled_here || enabled_before) {
                return Err(format!("monitor disabled on port {}", a.port));
            }
        }
        let mut cmds: Vec<VendorCommand> = payload
            .monitor
            .iter()
            .filter(|m| m.enabled)
            .map(|m| VendorCommand::Power(m.port.clone()))
            .collect();
        cmds.extend(self.converter.translate_edit(payload));
        for a in &payload.alarm {
            cmds.extend(self.converter.translate_alarm_setup(a));
        }
        Ok(cmds)
    }

    /// Sends every queued edit in one pipelined exchange. An edit whose
    /// commands the vendor rejects has its own applied commands undone and
    /// fails alone; the rest of the batch stands.
    async fn commit(&self, ds: &mut Datastore, batch: Vec<Queued>) {
        let mut enabled = BTreeSet::new();
        let mut accepted = Vec::new();
        for q in batch {
            match self.plan(ds, &enabled, &q.payload) {
                Ok(cmds) => {
                    enabled.extend(q.payload.monitor.iter().filter(|m| m.enabled).map(|m| m.port.clone()));
                    accepted.push((q, cmds));
                }
                Err(e) => {
                    let _ = q.done.send(Err(e));
                }
            }
        }
        if accepted.is_empty() {
            return;
        }

        // deletions of names this translator did not create need the device's view
        let mut learned = BTreeMap::new();
        let unknown = accepted.iter().any(|(q, _)| q.payload.delete.iter().any(|n| !ds.config.contains_key(n)));
        if unknown {
            match self.exchange(ds, &[VendorCommand::List]).await {
                Ok(r) => {
                    if let [VendorReply::List(conns)] = r.as_slice() {
                        learned = conns.iter().map(|c| (c.name.clone(), c.clone())).collect();
                    }
                }
                Err(e) => {
                    for (q, _) in accepted {
                        let _ = q.done.send(Err(e.clone()));
                    }
                    return;
                }
            }
        }

        let all: Vec<VendorCommand> = accepted.iter().flat_map(|(_, c)| c.iter().cloned()).collect();
        let replies = match self.exchange(ds, &all).await {
            Ok(r) => r,
            Err(e) => {
                for (q, _) in accepted {
                    let _ = q.done.send(Err(e.clone()));
                }
                return;
            }
        };

        let mut undo = Vec::new();
        let mut outcomes = Vec::new();
        let mut at = 0;
        for (_, cmds) in &accepted {
            let mine = &replies[at..at + cmds.len()];
            at += cmds.len();
            let Some(k) = mine.iter().position(|r| matches!(r, VendorReply::Err(_))) else {
                outcomes.push(Ok(()));
                continue;
            };
            let VendorReply::Err(reason) = &mine[k] else { unreachable!() };
            // the device keeps going after a failed line, so anything that
            // took effect anywhere in this edit has to be undone
            undo.extend(
                cmds.iter()
                    .zip(mine)
                    .rev()
                    .filter(|(c, r)| c.is_mutation() && matches!(r, VendorReply::Ok))
                    .filter_map(|(c, _)| Self::inverse(ds, c, &learned)),
            );
            outcomes.push(Err(format!("vendor {} rejected {:?}: {reason}", self.vendor(), cmds[k])));
        }
        if !undo.is_empty() {
            match self.exchange(ds, &undo).await {
                Ok(r) if r.iter().all(|r| *r == VendorReply::Ok) => {}
                other => warn!(vendor = %self.vendor(), "compensation incomplete: {other:?}"),
            }
        }

        for ((q, _), outcome) in accepted.into_iter().zip(outcomes) {
            if outcome.is_ok() {
                Self::record(ds, &q.payload);
            }
            let _ = q.done.send(outcome);
        }
    }

    async fn read_state(&self, ds: &mut Datastore) -> Result<StateReply, String> {
        let monitored: Vec<String> = ds
            .monitors
            .values()
            .filter(|m| m.enabled)
            .map(|m| m.port.clone())
            .collect();
        let cmds = self.converter.translate_get(&monitored);
        let replies = self.exchange(ds, &cmds).await?;
        let mut state = StateReply::default();
        for (c, r) in cmds.iter().zip(replies) {
            match (c, r) {
                (VendorCommand::List, VendorReply::List(conns)) => state.connections = conns,
                (VendorCommand::Power(port), VendorReply::Power(dbm)) => {
                    state.power.push(PowerReading {
                        port: port.clone(),
                        dbm,
                        wavelength: ds.monitors.get(port).and_then(|m| m.wavelength),
                    })
                }
                (c, VendorReply::Err(e)) => return Err(format!("vendor rejected {c:?}: {e}")),
                (c, r) => return Err(format!("unexpected vendor reply {r:?} to {c:?}")),
            }
        }
        state.connections.sort();
        Ok(state)
    }

    fn record(ds: &mut Datastore, payload: &EditPayload) {
        for n in &payload.delete {
            ds.config.remove(n);
        }
        for c in &payload.create {
            ds.config.insert(c.name.clone(), c.clone());
        }
        for m in &payload.monitor {
            ds.monitors.insert(m.port.clone(), m.clone());
        }
        for a in &payload.alarm {
            let e = ds.alarms.entry(a.port.clone()).or_default();
            if a.high.is_some() {
                e.0 = a.high;
            }
            if a.low.is_some() {
                e.1 = a.low;
            }
        }
        debug!(?payload, "edit applied");
    }
}

#[async_trait]
impl UnifiedDevice for Translator {
    /// Edits arriving while a batch is on the wire queue up and go out
    /// together once it returns.
    async fn edit_config(&self, payload: EditPayload) -> Result<(), String> {
        let (done, mut rx) = oneshot::channel();
        self.queue.lock().unwrap().push(Queued { payload, done });
        let mut ds = self.store.lock().await;
        match rx.try_recv() {
            Ok(r) => return r,
            Err(oneshot::error::TryRecvError::Closed) => return Err("edit interrupted".into()),
            Err(oneshot::error::TryRecvError::Empty) => {}
        }
        let batch = std::mem::take(&mut *self.queue.lock().unwrap());
        self.commit(&mut ds, batch).await;
        drop(ds);
        rx.await.unwrap_or_else(|_| Err("edit interrupted".into()))
    }

    /// Reads waiting together share one device read taken after all of
    /// them were issued.
    async fn get_state(&self) -> Result<StateReply, String> {
        let (done, mut rx) = oneshot::channel();
        self.readers.lock().unwrap().push(done);
        let mut ds = self.store.lock().await;
        match rx.try_recv() {
            Ok(r) => return r,
            Err(oneshot::error::TryRecvError::Closed) => return Err("read interrupted".into()),
            Err(oneshot::error::TryRecvError::Empty) => {}
        }
        let waiting = std::mem::take(&mut *self.readers.lock().unwrap());
        let state = self.read_state(&mut ds).await;
        for w in waiting {
            let _ = w.send(state.clone());
        }
        drop(ds);
        rx.await.unwrap_or_else(|_| Err("read interrupted".into()))
    }

    async fn get_config(&self) -> Result<Vec<InternalConnection>, String> {
        Ok(self.store.lock().await.config.values().cloned().collect())
    }

    async fn hello(&self) -> Result<(), String> {
        let mut ds = self.store.lock().await;
        self.link(&mut ds).await.map(|_| ())
    }

    fn notifications(&self) -> broadcast::Receiver<Notification> {
        self.events.subscribe()
    }
}

/// Starts a translator for the device at `vendor_target`, serving the
/// unified protocol on `listener`.
pub async fn run_translator(
    listener: TcpListener,
    vendor_target: &str,
    converter: Arc<dyn Converter>,
    timeout: Duration,
) -> Result<(ServerHandle, Arc<Translator>), String> {
    let t = Arc::new(Translator::new(converter, vendor_target, timeout));
    // open the vendor session now so device events flow before the first RPC
    t.hello().await?;
    Ok((serve(listener, t.clone()), t))
}
