//! One emulated OCS speaking a single vendor protocol.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ocs_model::{InternalConnection, MAX_DBM, MIN_DBM};
use ocs_sbi::vendor::reason;
use ocs_sbi::{Vendor, VendorCommand, VendorEvent, VendorReply};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::{AbortHandle, JoinSet};
use tokio::time::Instant;
use tracing::{debug, warn};

use crate::alarm::{Thresholds, DARK_DBM};
use crate::profile::{EmulatorProfile, FaultMode, LatencyModel};

/// Invoked after the device's cross-connects change, outside any device lock.
pub type ChangeHook = Arc<dyn Fn() + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceSnapshot {
    pub connections: Vec<InternalConnection>,
    pub alarms: BTreeMap<String, Thresholds>,
    pub powers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RequestCounts {
    pub reads: u64,
    pub mutations: u64,
    pub alarm_setups: u64,
    pub ignored: u64,
}

#[derive(Default)]
struct Counters {
    reads: AtomicU64,
    mutations: AtomicU64,
    alarm_setups: AtomicU64,
    ignored: AtomicU64,
}

#[derive(Default)]
struct State {
    conns: BTreeMap<String, InternalConnection>,
    power: BTreeMap<String, f64>,
    alarms: BTreeMap<String, Thresholds>,
}

struct Device {
    id: String,
    vendor: Vendor,
    latency: LatencyModel,
    rx_ports: BTreeSet<String>,
    tx_ports: BTreeSet<String>,
    addr: SocketAddr,
    state: Mutex<State>,
    settle: Mutex<Option<Instant>>,
    /// Applied mutations whose effect on light has not been propagated.
    dirty: AtomicBool,
    rng: Mutex<ChaCha8Rng>,
    samples: Mutex<Vec<Duration>>,
    events: broadcast::Sender<VendorEvent>,
    counters: Counters,
    fault: Mutex<FaultMode>,
    hook: Mutex<Option<ChangeHook>>,
    server: Mutex<Option<AbortHandle>>,
    wire: Mutex<VecDeque<String>>,
}

const WIRE_LOG_LEN: usize = 512;

#[derive(Clone)]
pub struct OcsEmulator(Arc<Device>);

impl std::fmt::Debug for OcsEmulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcsEmulator")
            .field("id", &self.0.id)
            .field("vendor", &self.0.vendor)
            .field("addr", &self.0.addr)
            .finish()
    }
}

/// Binds `listen` and starts serving the profile's vendor protocol. A device
/// started in `SERVER_DOWN` keeps its address but refuses connections until
/// the fault is cleared.
pub async fn start_emulator(
    id: impl Into<String>,
    profile: EmulatorProfile,
    listen: &str,
) -> io::Result<OcsEmulator> {
    let listener = TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let mut power: BTreeMap<String, f64> = profile
        .rx_ports
        .iter()
        .map(|p| (p.clone(), DARK_DBM))
        .collect();
    for (p, v) in &profile.port_powers {
        power.insert(p.clone(), *v);
    }
    let (events, _) = broadcast::channel(1024);
    let dev = Arc::new(Device {
        id: id.into(),
        vendor: profile.vendor,
        latency: profile.latency,
        rx_ports: profile.rx_ports.into_iter().collect(),
        tx_ports: profile.tx_ports.into_iter().collect(),
        addr,
        state: Mutex::new(State {
            power,
            ..Default::default()
        }),
        settle: Mutex::new(None),
        dirty: AtomicBool::new(false),
        rng: Mutex::new(ChaCha8Rng::seed_from_u64(profile.seed)),
        samples: Mutex::new(Vec::new()),
        events,
        counters: Counters::default(),
        fault: Mutex::new(profile.fault),
        hook: Mutex::new(None),
        server: Mutex::new(None),
        wire: Mutex::new(VecDeque::new()),
    });
    if profile.fault == FaultMode::ServerDown {
        drop(listener);
    } else {
        spawn_server(&dev, listener);
    }
    Ok(OcsEmulator(dev))
}

fn spawn_server(dev: &Arc<Device>, listener: TcpListener) {
    let d = dev.clone();
    let task = tokio::spawn(async move {
        let mut sessions = JoinSet::new();
        loop {
            tokio::select! {
                accepted = listener.accept() => match accepted {
                    Ok((stream, _)) => { sessions.spawn(session(d.clone(), stream)); }
                    Err(e) => warn!(device = %d.id, "accept failed: {e}"),
                },
                Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            }
        }
    });
    if let Some(old) = dev.server.lock().unwrap().replace(task.abort_handle()) {
        old.abort();
    }
}

async fn session(dev: Arc<Device>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let dialect = dev.vendor.dialect();
    let (rd, mut wr) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (in_tx, mut in_rx) = mpsc::unbounded_channel::<(String, Instant)>();
    let mut tasks = JoinSet::new();
    tasks.spawn(async move {
        while let Some(mut s) = out_rx.recv().await {
            s.push('\n');
            if wr.write_all(s.as_bytes()).await.is_err() {
                break;
            }
        }
    });
    let mut events = dev.events.subscribe();
    let ev_out = out_tx.clone();
    tasks.spawn(async move {
        loop {
            match events.recv().await {
                Ok(ev) => {
                    if ev_out.send(dialect.encode_event(&ev)).is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });
    let d = dev.clone();
    tasks.spawn(async move {
        while let Some((line, arrived)) = in_rx.recv().await {
            let more = !in_rx.is_empty();
            if let Some(reply) = d.process(&line, arrived, more).await {
                if out_tx.send(reply).is_err() {
                    break;
                }
            }
        }
    });
    let mut rd = BufReader::new(rd);
    let mut line = String::new();
    loop {
        line.clear();
        match rd.read_line(&mut line).await {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let text = line.trim_end_matches(['\r', '\n']);
        if text.trim().is_empty() {
            continue;
        }
        if in_tx.send((text.to_string(), Instant::now())).is_err() {
            break;
        }
    }
}

impl Device {
    /// Mutations arriving while an actuation is under way join it.
    fn settle_deadline(&self, arrived: Instant) -> Instant {
        let mut settle = self.settle.lock().unwrap();
        match *settle {
            Some(d) if d > arrived => d,
            _ => {
                let lat = self.latency.sample(&mut *self.rng.lock().unwrap());
                self.samples.lock().unwrap().push(lat);
                let d = arrived + lat;
                *settle = Some(d);
                d
            }
        }
    }

    /// Light is propagated once per burst of pipelined lines: before the
    /// burst's last reply, or before any read that needs it.
    async fn process(&self, line: &str, arrived: Instant, more: bool) -> Option<String> {
        let dialect = self.vendor.dialect();
        {
            let mut wire = self.wire.lock().unwrap();
            if wire.len() == WIRE_LOG_LEN {
                wire.pop_front();
            }
            wire.push_back(line.to_string());
        }
        let fault = *self.fault.lock().unwrap();
        if fault == FaultMode::TimeoutAll {
            self.counters.ignored.fetch_add(1, Ordering::Relaxed);
            return None;
        }
        let cmd = match dialect.parse_command(line) {
            Ok(c) => c,
            Err(e) => {
                debug!(device = %self.id, "unparsable command {line:?}: {e}");
                return Some(dialect.encode_reply(&VendorReply::Err(reason::BAD_COMMAND.into())));
            }
        };
        let reply = if cmd.is_mutation() {
            self.counters.mutations.fetch_add(1, Ordering::Relaxed);
            tokio::time::sleep_until(self.settle_deadline(arrived)).await;
            if fault == FaultMode::LieOnApply {
                VendorReply::Ok
            } else {
                let r = self.apply(&cmd);
                if r == VendorReply::Ok {
                    self.dirty.store(true, Ordering::SeqCst);
                }
                r
            }
        } else if cmd.is_read() {
            if self.dirty.swap(false, Ordering::SeqCst) {
                self.changed();
            }
            self.counters.reads.fetch_add(1, Ordering::Relaxed);
            self.read(&cmd)
        } else {
            self.counters.alarm_setups.fetch_add(1, Ordering::Relaxed);
            if fault == FaultMode::LieOnApply {
                VendorReply::Ok
            } else {
                self.apply(&cmd)
            }
        };
        if !more && self.dirty.swap(false, Ordering::SeqCst) {
            self.changed();
        }
        Some(dialect.encode_reply(&reply))
    }

    fn has_port(&self, p: &str) -> bool {
        self.rx_ports.contains(p) || self.tx_ports.contains(p)
    }

    fn apply(&self, cmd: &VendorCommand) -> VendorReply {
        let err = |r: &str| VendorReply::Err(r.to_string());
        let mut st = self.state.lock().unwrap();
        match cmd {
            VendorCommand::Connect(c) => {
                if !self.rx_ports.contains(&c.rx) || !self.tx_ports.contains(&c.tx) {
                    return err(reason::UNKNOWN_PORT);
                }
                if st.conns.contains_key(&c.name) {
                    return err(reason::EXISTS);
                }
                if st.conns.values().any(|x| x.rx == c.rx || x.tx == c.tx) {
                    return err(reason::BUSY);
                }
                st.conns.insert(c.name.clone(), c.clone());
                VendorReply::Ok
            }
            VendorCommand::Disconnect(name) => match st.conns.remove(name) {
                Some(_) => VendorReply::Ok,
                None => err(reason::NO_SUCH_XC),
            },
            VendorCommand::Alarm { port, hi, lo } => {
                if !self.has_port(port) {
                    return err(reason::UNKNOWN_PORT);
                }
                if [hi, lo]
                    .into_iter()
                    .flatten()
                    .any(|v| !(MIN_DBM..=MAX_DBM).contains(v))
                {
                    return err(reason::RANGE);
                }
                st.alarms.entry(port.clone()).or_default().merge(*hi, *lo);
                VendorReply::Ok
            }
            VendorCommand::List | VendorCommand::Power(_) => err(reason::BAD_COMMAND),
        }
    }

    fn read(&self, cmd: &VendorCommand) -> VendorReply {
        let st = self.state.lock().unwrap();
        match cmd {
            VendorCommand::List => VendorReply::List(st.conns.values().cloned().collect()),
            VendorCommand::Power(p) => {
                if self.rx_ports.contains(p) {
                    VendorReply::Power(st.power.get(p).copied().unwrap_or(DARK_DBM))
                } else if self.tx_ports.contains(p) {
                    let out = st
                        .conns
                        .values()
                        .find(|c| &c.tx == p)
                        .and_then(|c| st.power.get(&c.rx).copied())
                        .unwrap_or(DARK_DBM);
                    VendorReply::Power(out)
                } else {
                    VendorReply::Err(reason::UNKNOWN_PORT.into())
                }
            }
            _ => VendorReply::Err(reason::BAD_COMMAND.into()),
        }
    }

    fn changed(&self) {
        let hook = self.hook.lock().unwrap().clone();
        if let Some(h) = hook {
            h();
        }
    }

    fn set_powers(&self, updates: &BTreeMap<String, f64>) {
        let mut fired = Vec::new();
        {
            let mut st = self.state.lock().unwrap();
            for (port, &dbm) in updates {
                if !self.rx_ports.contains(port) {
                    continue;
                }
                let dbm = dbm.max(DARK_DBM);
                let old = st.power.insert(port.clone(), dbm).unwrap_or(DARK_DBM);
                if let Some(level) = st.alarms.get(port).and_then(|t| t.crossing(old, dbm)) {
                    fired.push(VendorEvent {
                        port: port.clone(),
                        level,
                        dbm,
                    });
                }
            }
        }
        for ev in fired {
            debug!(device = %self.id, ?ev, "alarm");
            let _ = self.events.send(ev);
        }
    }
}

impl OcsEmulator {
    pub fn id(&self) -> &str {
        &self.0.id
    }

    pub fn vendor(&self) -> Vendor {
        self.0.vendor
    }

    pub fn addr(&self) -> SocketAddr {
        self.0.addr
    }

    pub fn latency_model(&self) -> LatencyModel {
        self.0.latency
    }

    pub fn rx_ports(&self) -> impl Iterator<Item = &str> {
        self.0.rx_ports.iter().map(String::as_str)
    }

    pub fn tx_ports(&self) -> impl Iterator<Item = &str> {
        self.0.tx_ports.iter().map(String::as_str)
    }

    pub fn fault(&self) -> FaultMode {
        *self.0.fault.lock().unwrap()
    }

    /// Switching into `SERVER_DOWN` closes the listener and every open
    /// session; switching out of it listens again on the same address.
    pub async fn set_fault(&self, mode: FaultMode) -> io::Result<()> {
        let prev = std::mem::replace(&mut *self.0.fault.lock().unwrap(), mode);
        if mode == FaultMode::ServerDown {
            if let Some(h) = self.0.server.lock().unwrap().take() {
                h.abort();
            }
        } else if prev == FaultMode::ServerDown {
            let listener = TcpListener::bind(self.0.addr).await?;
            spawn_server(&self.0, listener);
        }
        Ok(())
    }

    pub fn set_change_hook(&self, hook: Option<ChangeHook>) {
        *self.0.hook.lock().unwrap() = hook;
    }

    pub fn set_port_power(&self, port: &str, dbm: f64) -> Result<(), String> {
        if !self.0.rx_ports.contains(port) {
            return Err(format!("{} has no rx port {port}", self.0.id));
        }
        self.0.set_powers(&BTreeMap::from([(port.to_string(), dbm)]));
        Ok(())
    }

    pub(crate) fn apply_powers(&self, updates: &BTreeMap<String, f64>) {
        self.0.set_powers(updates);
    }

    pub fn port_power(&self, port: &str) -> Option<f64> {
        match self.0.read(&VendorCommand::Power(port.to_string())) {
            VendorReply::Power(v) => Some(v),
            _ => None,
        }
    }

    pub fn connections(&self) -> Vec<InternalConnection> {
        self.0.state.lock().unwrap().conns.values().cloned().collect()
    }

    /// Out-of-band edits, bypassing latency and faults (an operator at the
    /// device's console).
    pub fn force_connect(&self, c: InternalConnection) -> Result<(), String> {
        match self.0.apply(&VendorCommand::Connect(c)) {
            VendorReply::Ok => {
                self.0.changed();
                Ok(())
            }
            VendorReply::Err(e) => Err(e),
            other => Err(format!("{other:?}")),
        }
    }

    pub fn force_disconnect(&self, name: &str) -> Result<(), String> {
        match self.0.apply(&VendorCommand::Disconnect(name.to_string())) {
            VendorReply::Ok => {
                self.0.changed();
                Ok(())
            }
            VendorReply::Err(e) => Err(e),
            other => Err(format!("{other:?}")),
        }
    }

    pub fn snapshot(&self) -> DeviceSnapshot {
        let st = self.0.state.lock().unwrap();
        DeviceSnapshot {
            connections: st.conns.values().cloned().collect(),
            alarms: st.alarms.clone(),
            powers: st.power.clone(),
        }
    }

    pub fn counts(&self) -> RequestCounts {
        let c = &self.0.counters;
        RequestCounts {
            reads: c.reads.load(Ordering::Relaxed),
            mutations: c.mutations.load(Ordering::Relaxed),
            alarm_setups: c.alarm_setups.load(Ordering::Relaxed),
            ignored: c.ignored.load(Ordering::Relaxed),
        }
    }

    /// Every actuation latency drawn so far, in order.
    pub fn latency_samples(&self) -> Vec<Duration> {
        self.0.samples.lock().unwrap().clone()
    }

    /// The most recent raw request lines, oldest first.
    pub fn wire_log(&self) -> Vec<String> {
        self.0.wire.lock().unwrap().iter().cloned().collect()
    }

    pub fn shutdown(&self) {
        if let Some(h) = self.0.server.lock().unwrap().take() {
            h.abort();
        }
    }
}
