//! The controller: inventory, path service, event bookkeeping and the
//! glue between them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use ocs_model::{
    check_threshold, forward_name, reverse_name, ConnInfo, FiberLink, FiberPath, Fpce, NbiError,
    ObjectType, OcsNode, PathRequest, ResourceStatus, ResourceStore, Terminal, TopologyDoc,
};
use ocs_sbi::{AlarmConfig, EditPayload, MonitorConfig, SbiSession, DEFAULT_RPC_TIMEOUT};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio::task::{JoinHandle, JoinSet};
use tracing::{info, warn};

use crate::api::{self, PathParams};
use crate::dispatch::{self, DispatchStats};
use crate::events::{ActionSpec, EventSpec, EventType, HandlerBinding, Journal};
use crate::reconcile::{ReconcilePolicy, ReconcileReport};
use crate::registry::DeviceRegistry;
use crate::renderer::{AtomicCommand, ExecutionReport, OcsCommand, Renderer, DEFAULT_COMMAND_DEADLINE};
use crate::wal::{DurableState, RecordKind, RecordOp, ResourceBody, Wal};

pub const WAL_FILE: &str = "state.wal";
pub const JOURNAL_FILE: &str = "actions.jsonl";
pub const REPORT_FILE: &str = "reconcile-report.json";

/// Receive power below which a terminal reports loss of signal.
pub const LOS_DBM: f64 = -30.0;

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// Where the log, journal and reconcile report live. `None` keeps
    /// everything in memory.
    pub state_dir: Option<PathBuf>,
    pub policy: ReconcilePolicy,
    pub sbi_timeout: Duration,
    pub command_deadline: Duration,
    /// `None` disables the health checker.
    pub hello_interval: Option<Duration>,
    pub auto_restore_on_hello: bool,
    /// Terminate the process at a kill point instead of only halting.
    pub exit_on_kill: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            state_dir: None,
            policy: ReconcilePolicy::MarkUnavailable,
            sbi_timeout: DEFAULT_RPC_TIMEOUT,
            command_deadline: DEFAULT_COMMAND_DEADLINE,
            hello_interval: Some(Duration::from_secs(5)),
            auto_restore_on_hello: false,
            exit_on_kill: false,
        }
    }
}

impl ControllerConfig {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        ControllerConfig {
            state_dir: Some(dir.into()),
            ..Default::default()
        }
    }

    pub fn with_policy(mut self, p: ReconcilePolicy) -> Self {
        self.policy = p;
        self
    }

    pub fn without_health_checks(mut self) -> Self {
        self.hello_interval = None;
        self
    }
}

/// Places in the create-path sequence where a crash can be simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KillPoint {
    BeforeDeviceConfig,
    BetweenConfigAndPersist,
    AfterPersist,
}

impl KillPoint {
    pub const ALL: [KillPoint; 3] = [
        KillPoint::BeforeDeviceConfig,
        KillPoint::BetweenConfigAndPersist,
        KillPoint::AfterPersist,
    ];
}

impl FromStr for KillPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "before-device-config" => Ok(KillPoint::BeforeDeviceConfig),
            "between-config-and-persist" => Ok(KillPoint::BetweenConfigAndPersist),
            "after-persist" => Ok(KillPoint::AfterPersist),
            _ => Err(format!("unknown kill point {s:?}")),
        }
    }
}

/// A path whose endpoint terminals are watched for loss of signal.
#[derive(Debug, Clone)]
pub(crate) struct ArmedPath {
    pub endpoints: Vec<(String, String)>,
    pub since: f64,
}

type Record = (RecordKind, RecordOp, Value);

fn resource(body: ResourceBody) -> Record {
    (
        RecordKind::Resource,
        RecordOp::Put,
        serde_json::to_value(body).expect("resource bodies serialize"),
    )
}

fn status_record(object_id: &str, object_type: ObjectType, status: ResourceStatus) -> Record {
    resource(ResourceBody::Status {
        object_id: object_id.to_string(),
        object_type,
        status,
    })
}

fn path_record(p: &FiberPath) -> Record {
    (RecordKind::Path, RecordOp::Put, serde_json::to_value(p).expect("paths serialize"))
}

fn put<T: serde::Serialize>(kind: RecordKind, v: &T) -> Record {
    (kind, RecordOp::Put, serde_json::to_value(v).expect("records serialize"))
}

fn params<T: DeserializeOwned>(v: Value) -> Result<T, NbiError> {
    serde_json::from_value(v).map_err(|e| NbiError::invalid_range(format!("bad params: {e}")))
}

fn to_value<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

/// Holds a service id while an operation on it is running.
struct SvcGuard<'a> {
    set: &'a Mutex<BTreeSet<String>>,
    svc: String,
}

impl Drop for SvcGuard<'_> {
    fn drop(&mut self) {
        self.set.lock().unwrap().remove(&self.svc);
    }
}

pub struct Controller {
    pub(crate) me: Weak<Controller>,
    pub(crate) cfg: ControllerConfig,
    pub(crate) state: Mutex<DurableState>,
    wal: Wal,
    fpce: Fpce,
    pub(crate) registry: Arc<DeviceRegistry>,
    renderer: Renderer,
    pub(crate) journal: Journal,
    in_flight: Mutex<BTreeSet<String>>,
    pub(crate) armed: Mutex<BTreeMap<String, ArmedPath>>,
    /// Terminal ports already carrying the loss-of-signal alarm.
    los_ready: Mutex<BTreeSet<(String, String)>>,
    pub(crate) busy_triggers: Mutex<BTreeSet<String>>,
    pub(crate) stats: DispatchStats,
    pub(crate) health_down: Mutex<BTreeSet<String>>,
    kill: Mutex<Option<KillPoint>>,
    dead: AtomicBool,
    report: Mutex<ReconcileReport>,
    last_execution: Mutex<Option<ExecutionReport>>,
    tasks: Mutex<Vec<JoinHandle<()>>>,
}

impl Controller {
    /// Replays persisted state, reconnects to known devices, reconciles
    /// them against the replayed intent and starts background work. The
    /// controller is ready for northbound traffic when this returns.
    pub async fn start(cfg: ControllerConfig) -> std::io::Result<Arc<Controller>> {
        let (wal, state) = match &cfg.state_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Wal::open(&dir.join(WAL_FILE))?
            }
            None => (Wal::ephemeral(), DurableState::default()),
        };
        wal.compact(&state)?;
        let journal = Journal::open(cfg.state_dir.as_ref().map(|d| d.join(JOURNAL_FILE)).as_deref())?;
        let (tx, rx) = mpsc::unbounded_channel();
        let registry = Arc::new(DeviceRegistry::new(cfg.sbi_timeout, tx));
        let renderer = Renderer::new(registry.clone());
        let policy = cfg.policy;
        let ctl = Arc::new_cyclic(|me| Controller {
            me: me.clone(),
            cfg,
            state: Mutex::new(state),
            wal,
            fpce: Fpce::new(),
            registry,
            renderer,
            journal,
            in_flight: Mutex::default(),
            armed: Mutex::default(),
            los_ready: Mutex::default(),
            busy_triggers: Mutex::default(),
            stats: DispatchStats::default(),
            health_down: Mutex::default(),
            kill: Mutex::new(None),
            dead: AtomicBool::new(false),
            report: Mutex::new(ReconcileReport::empty(policy)),
            last_execution: Mutex::default(),
            tasks: Mutex::default(),
        });

        let devices: Vec<(String, ConnInfo)> = {
            let st = ctl.state.lock().unwrap();
            st.store
                .nodes()
                .map(|n| (n.id.clone(), n.conn.clone()))
                .chain(st.store.terminals().map(|t| (t.id.clone(), t.conn.clone())))
                .collect()
        };
        let mut set = JoinSet::new();
        for (id, conn) in devices {
            let s = ctl.registry.lazy(&id, &conn);
            ctl.registry.insert(s.clone());
            let sink = ctl.registry.sink();
            set.spawn(async move {
                if let Err(e) = s.subscribe(sink).await {
                    warn!(device = %s.device(), "not reachable at startup: {e}");
                }
            });
        }
        set.join_all().await;

        let report = ctl.reconcile().await;
        if let Some(dir) = &ctl.cfg.state_dir {
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            std::fs::write(dir.join(REPORT_FILE), text)?;
        }
        *ctl.report.lock().unwrap() = report;
        ctl.rearm_all().await;

        let mut tasks = vec![tokio::spawn(dispatch::run_dispatcher(ctl.me.clone(), rx))];
        if let Some(every) = ctl.cfg.hello_interval {
            tasks.push(tokio::spawn(dispatch::run_health(ctl.me.clone(), every)));
        }
        *ctl.tasks.lock().unwrap() = tasks;
        Ok(ctl)
    }

    /// Stops background work and closes every device session.
    pub async fn shutdown(&self) {
        for t in self.tasks.lock().unwrap().drain(..) {
            t.abort();
        }
        self.registry.close_all().await;
    }

    pub(crate) fn arc(&self) -> Arc<Controller> {
        self.me.upgrade().expect("controller alive while in use")
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state_dir(&self) -> Option<&Path> {
        self.cfg.state_dir.as_deref()
    }

    pub fn store(&self) -> ResourceStore {
        self.state.lock().unwrap().store.clone()
    }

    pub fn durable_state(&self) -> DurableState {
        self.state.lock().unwrap().clone()
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn wal(&self) -> &Wal {
        &self.wal
    }

    pub fn reconcile_report(&self) -> ReconcileReport {
        self.report.lock().unwrap().clone()
    }

    /// Timing and per-switch outcomes of the most recent device operation.
    pub fn last_execution(&self) -> Option<ExecutionReport> {
        self.last_execution.lock().unwrap().clone()
    }

    pub fn session(&self, id: &str) -> Option<Arc<SbiSession>> {
        self.registry.get(id)
    }

    /// Simulates a crash the next time the create sequence reaches `p`.
    pub fn set_kill_point(&self, p: Option<KillPoint>) {
        *self.kill.lock().unwrap() = p;
    }

    pub fn is_halted(&self) -> bool {
        self.dead.load(Ordering::SeqCst)
    }

    fn reached(&self, p: KillPoint) -> bool {
        if *self.kill.lock().unwrap() != Some(p) {
            return false;
        }
        warn!(point = ?p, "kill point reached");
        if self.cfg.exit_on_kill {
            std::process::exit(137);
        }
        self.dead.store(true, Ordering::SeqCst);
        true
    }

    fn halted() -> NbiError {
        NbiError::path_oper_failed("controller halted")
    }

    /// Applies `f` to a copy of the durable state, logs the records it
    /// returns and only then publishes the copy.
    pub(crate) fn commit<T>(
        &self,
        f: impl FnOnce(&mut DurableState) -> Result<(T, Vec<Record>), NbiError>,
    ) -> Result<T, NbiError> {
        let mut st = self.state.lock().unwrap();
        let mut next = st.clone();
        let (out, records) = f(&mut next)?;
        if !records.is_empty() {
            self.wal.append_batch(records)?;
        }
        *st = next;
        Ok(out)
    }

    pub(crate) fn set_status(
        &self,
        id: &str,
        ty: ObjectType,
        status: ResourceStatus,
    ) -> Result<(), NbiError> {
        self.commit(|st| {
            st.store.update_status(id, ty, status)?;
            Ok(((), vec![status_record(id, ty, status)]))
        })
    }

    fn quarantine(&self, switches: &BTreeSet<String>) {
        for ocs in switches {
            match self.set_status(ocs, ObjectType::Switch, ResourceStatus::Unavailable) {
                Ok(()) => warn!(%ocs, "switch marked UNAVAILABLE"),
                Err(e) => warn!(%ocs, "could not mark switch UNAVAILABLE: {e}"),
            }
        }
    }

    /// Dispatches one northbound request.
    pub async fn handle(&self, method: &str, p: Value) -> Result<Value, NbiError> {
        if self.is_halted() {
            return Err(Self::halted());
        }
        match method {
            api::ADD_SWITCH => self.add_switch(params(p)?).await,
            api::ADD_TERMINAL => self.add_terminal(params(p)?).await,
            api::ADD_LINK => self.add_link(params(p)?),
            api::CREATE_NETWORK => self.create_network(params(p)?).await,
            api::UPDATE_RESOURCE_STATUS => self.update_resource_status(params(p)?),
            api::CREATE_FIBER_PATH => self.create_fiber_path(params(p)?).await.map(to_value),
            api::DELETE_FIBER_PATH => {
                let a: api::SvcId = params(p)?;
                self.delete_fiber_path(&a.svc_id).await
            }
            api::RESTORE_FIBER_PATH => self.restore_fiber_path(params(p)?).await.map(to_value),
            api::UPDATE_PATH_AVAILABILITY => self.update_path_availability(params(p)?),
            api::ADD_EVENT => self.add_event(params(p)?).await,
            api::CREATE_ACTION => self.create_action(params(p)?),
            api::DELETE_ACTION => self.delete_action(params(p)?),
            api::CREATE_EVENT_HANDLER => self.create_event_handler(params(p)?),
            api::CREATE_ALARM_HANDLER => self.create_alarm_handler(params(p)?),
            other => Err(NbiError::invalid_range(format!("unknown method {other:?}"))),
        }
    }

    // ---- resources ----

    fn check_fresh(&self, id: &str) -> Result<(), NbiError> {
        let st = self.state.lock().unwrap();
        if st.store.is_node(id) || st.store.is_terminal(id) || st.store.link(id).is_some() {
            return Err(NbiError::already_exist(format!("resource {id}")));
        }
        Ok(())
    }

    async fn probe(&self, id: &str, conn: &ConnInfo) -> Result<Arc<SbiSession>, NbiError> {
        self.registry
            .open(id, conn)
            .await
            .map_err(|e| NbiError::connection_failed(format!("{id} at {conn}: {e}")))
    }

    pub async fn add_switch(&self, p: api::AddSwitch) -> Result<Value, NbiError> {
        let (ntx, nrx) = (p.tx_ports.len(), p.rx_ports.len());
        let node = OcsNode::new(&p.ocs_id, p.conn_info, p.tx_ports, p.rx_ports);
        if node.tx_ports.len() != ntx || node.rx_ports.len() != nrx {
            return Err(NbiError::invalid_range(format!(
                "switch {} lists a port twice",
                node.id
            )));
        }
        node.validate()?;
        self.check_fresh(&node.id)?;
        let session = self.probe(&node.id, &node.conn).await?;
        let res = self.commit(|st| {
            st.store.register_switch(node.clone())?;
            Ok(((), vec![resource(ResourceBody::Switch(node.clone()))]))
        });
        if let Err(e) = res {
            session.close().await;
            return Err(e);
        }
        self.registry.insert(session);
        info!(ocs = %node.id, "switch registered");
        Ok(json!({"ocs_id": node.id, "status": ResourceStatus::Available}))
    }

    pub async fn add_terminal(&self, p: api::AddTerminal) -> Result<Value, NbiError> {
        let t = Terminal::new(&p.terminal_id, p.conn_info);
        if t.id.is_empty() {
            return Err(NbiError::invalid_range("terminal id is empty"));
        }
        t.conn.validate()?;
        self.check_fresh(&t.id)?;
        let session = self.probe(&t.id, &t.conn).await?;
        let res = self.commit(|st| {
            st.store.register_terminal(t.clone())?;
            Ok(((), vec![resource(ResourceBody::Terminal(t.clone()))]))
        });
        if let Err(e) = res {
            session.close().await;
            return Err(e);
        }
        self.registry.insert(session);
        Ok(json!({"terminal_id": t.id, "status": ResourceStatus::Available}))
    }

    pub fn add_link(&self, p: api::AddLink) -> Result<Value, NbiError> {
        let l = FiberLink::new(&p.link_id, p.src, p.dst, p.src_port, p.dst_port);
        self.commit(|st| {
            st.store.register_link(l.clone())?;
            Ok(((), vec![resource(ResourceBody::Link(l.clone()))]))
        })?;
        Ok(json!({"link_id": l.id, "status": ResourceStatus::Available}))
    }

    fn load_topology(v: Value) -> Result<TopologyDoc, NbiError> {
        match v {
            Value::String(s) => {
                let p = Path::new(&s);
                if !s.contains('\n') && p.is_file() {
                    let text = std::fs::read_to_string(p).map_err(|e| {
                        NbiError::invalid_range(format!("cannot read topology file {s}: {e}"))
                    })?;
                    TopologyDoc::parse(&text)
                } else {
                    TopologyDoc::parse(&s)
                }
            }
            v @ Value::Object(_) => serde_json::from_value(v)
                .map_err(|e| NbiError::invalid_range(format!("bad topology document: {e}"))),
            Value::Null => Ok(TopologyDoc::default()),
            _ => Err(NbiError::invalid_range("topology_file must be a path, text or object")),
        }
    }

    /// Registers a whole topology, or nothing.
    pub async fn create_network(&self, p: api::CreateNetwork) -> Result<Value, NbiError> {
        let doc = Self::load_topology(p.topology_file)?;
        {
            let mut dry = self.state.lock().unwrap().store.clone();
            dry.apply_network(&doc)?;
        }
        let mut targets = Vec::new();
        for s in &doc.switches {
            targets.push((s.id.clone(), s.to_node()?.conn));
        }
        for t in &doc.terminals {
            targets.push((t.id.clone(), t.to_terminal()?.conn));
        }
        let mut set = JoinSet::new();
        for (id, conn) in targets {
            let reg = self.registry.clone();
            set.spawn(async move {
                reg.open(&id, &conn)
                    .await
                    .map_err(|e| NbiError::connection_failed(format!("{id} at {conn}: {e}")))
            });
        }
        let mut sessions = Vec::new();
        let mut failure = None;
        while let Some(r) = set.join_next().await {
            match r.expect("probe task panicked") {
                Ok(s) => sessions.push(s),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        let res = match failure {
            Some(e) => Err(e),
            None => self.commit(|st| {
                st.store.apply_network(&doc)?;
                let mut recs = Vec::new();
                for s in &doc.switches {
                    recs.push(resource(ResourceBody::Switch(st.store.node(&s.id).unwrap().clone())));
                }
                for t in &doc.terminals {
                    recs.push(resource(ResourceBody::Terminal(st.store.terminal(&t.id).unwrap().clone())));
                }
                for l in &doc.links {
                    recs.push(resource(ResourceBody::Link(st.store.link(&l.id).unwrap().clone())));
                }
                Ok(((), recs))
            }),
        };
        if let Err(e) = res {
            for s in sessions {
                s.close().await;
            }
            return Err(e);
        }
        for s in sessions {
            self.registry.insert(s);
        }
        info!(
            switches = doc.switches.len(),
            terminals = doc.terminals.len(),
            links = doc.links.len(),
            "network registered"
        );
        Ok(json!({
            "switches": doc.switches.len(),
            "terminals": doc.terminals.len(),
            "links": doc.links.len(),
        }))
    }

    pub fn update_resource_status(&self, p: api::UpdateResourceStatus) -> Result<Value, NbiError> {
        self.set_status(&p.object_id, p.object_type, p.status)?;
        if p.status.is_available() {
            self.health_down.lock().unwrap().remove(&p.object_id);
        }
        Ok(json!({"object_id": p.object_id, "status": p.status}))
    }

    // ---- paths ----

    fn reserve_new(&self, svc: &str) -> Result<SvcGuard<'_>, NbiError> {
        if svc.is_empty() {
            return Err(NbiError::invalid_range("svc_id is empty"));
        }
        let st = self.state.lock().unwrap();
        let mut inf = self.in_flight.lock().unwrap();
        if st.store.path(svc).is_some() || inf.contains(svc) {
            return Err(NbiError::already_exist(format!("path {svc}")));
        }
        inf.insert(svc.to_string());
        Ok(SvcGuard {
            set: &self.in_flight,
            svc: svc.to_string(),
        })
    }

    fn reserve_existing(&self, svc: &str) -> Result<SvcGuard<'_>, NbiError> {
        let st = self.state.lock().unwrap();
        let mut inf = self.in_flight.lock().unwrap();
        if st.store.path(svc).is_none() {
            return Err(NbiError::not_found(format!("path {svc}")));
        }
        if !inf.insert(svc.to_string()) {
            return Err(NbiError::blocking(format!("path {svc} has an operation in progress")));
        }
        Ok(SvcGuard {
            set: &self.in_flight,
            svc: svc.to_string(),
        })
    }

    fn commands(path: &FiberPath, create: bool) -> Vec<OcsCommand> {
        path.hops
            .iter()
            .map(|h| {
                let conns = path.per_ocs_configs.get(h).cloned().unwrap_or_default();
                if create {
                    OcsCommand::create(h, conns)
                } else {
                    OcsCommand::delete(h, conns)
                }
            })
            .collect()
    }

    async fn render(&self, path: &FiberPath, create: bool) -> Result<(), crate::renderer::RenderFailure> {
        let cmd = AtomicCommand::new(Self::commands(path, create)).with_deadline(self.cfg.command_deadline);
        let res = self.renderer.execute_atomic(cmd).await;
        let report = match &res {
            Ok(r) => r.clone(),
            Err(f) => f.report.clone(),
        };
        *self.last_execution.lock().unwrap() = Some(report);
        res.map(|_| ())
    }

    pub async fn create_fiber_path(&self, p: PathParams) -> Result<FiberPath, NbiError> {
        let _guard = self.reserve_new(&p.svc_id)?;
        self.create_inner(&p).await
    }

    async fn create_inner(&self, p: &PathParams) -> Result<FiberPath, NbiError> {
        let mut req = PathRequest::new(&p.a, &p.z);
        if let Some(alg) = &p.pce_alg {
            req = req.with_algorithm(alg);
        }
        if let Some(hops) = &p.ocs_list {
            req = req.with_hops(hops.clone());
        }
        let path = {
            let mut st = self.state.lock().unwrap();
            if st.store.path(&p.svc_id).is_some() {
                return Err(NbiError::already_exist(format!("path {}", p.svc_id)));
            }
            let plan = self.fpce.compute_path(&st.store, &req)?;
            let path = plan.to_fiber_path(&p.svc_id);
            st.store.allocate_path(path.clone())?;
            path
        };
        if self.reached(KillPoint::BeforeDeviceConfig) {
            return Err(Self::halted());
        }
        if let Err(f) = self.render(&path, true).await {
            let _ = self.state.lock().unwrap().store.release_path(&path.svc_id);
            self.quarantine(&f.suspects());
            return Err(NbiError::path_oper_failed(format!(
                "path {} not established: {f}",
                path.svc_id
            )));
        }
        if self.reached(KillPoint::BetweenConfigAndPersist) {
            return Err(Self::halted());
        }
        if let Err(e) = self.commit(|_| Ok(((), vec![path_record(&path)]))) {
            let _ = self.state.lock().unwrap().store.release_path(&path.svc_id);
            if let Err(f) = self.render(&path, false).await {
                self.quarantine(&f.suspects());
            }
            return Err(e);
        }
        if self.reached(KillPoint::AfterPersist) {
            return Err(Self::halted());
        }
        self.arm_path(&path).await;
        info!(svc = %path.svc_id, hops = ?path.hops, "path established");
        Ok(path)
    }

    pub async fn delete_fiber_path(&self, svc: &str) -> Result<Value, NbiError> {
        let _guard = self.reserve_existing(svc)?;
        self.delete_inner(svc).await?;
        Ok(json!({"svc_id": svc}))
    }

    async fn delete_inner(&self, svc: &str) -> Result<(), NbiError> {
        let path = self
            .state
            .lock()
            .unwrap()
            .store
            .path(svc)
            .cloned()
            .ok_or_else(|| NbiError::not_found(format!("path {svc}")))?;
        self.disarm(svc);
        if let Err(f) = self.render(&path, false).await {
            self.quarantine(&f.suspects());
            self.arm_path(&path).await;
            return Err(NbiError::path_oper_failed(format!("path {svc} not released: {f}")));
        }
        let res = self.commit(|st| {
            st.store.release_path(svc)?;
            Ok(((), vec![(RecordKind::Path, RecordOp::Delete, json!({ "svc_id": svc }))]))
        });
        if let Err(e) = res {
            if let Err(f) = self.render(&path, true).await {
                self.quarantine(&f.suspects());
            }
            self.arm_path(&path).await;
            return Err(e);
        }
        info!(%svc, "path released");
        Ok(())
    }

    /// Deletes the path and establishes it again. When the new route is
    /// blocked the old one stays deleted.
    pub async fn restore_fiber_path(&self, p: PathParams) -> Result<FiberPath, NbiError> {
        let _guard = self.reserve_existing(&p.svc_id)?;
        {
            let st = self.state.lock().unwrap();
            let old = st.store.path(&p.svc_id).expect("reserved above");
            if old.a != p.a || old.z != p.z {
                return Err(NbiError::invalid_range(format!(
                    "path {} runs between {} and {}, not {} and {}",
                    p.svc_id, old.a, old.z, p.a, p.z
                )));
            }
        }
        self.delete_inner(&p.svc_id).await?;
        self.create_inner(&p).await
    }

    pub fn update_path_availability(&self, p: api::UpdatePathAvailability) -> Result<Value, NbiError> {
        self.commit(|st| {
            st.store.set_path_availability(&p.svc_id, p.status)?;
            let path = st.store.path(&p.svc_id).expect("updated above").clone();
            let mut recs: Vec<Record> = path
                .hops
                .iter()
                .map(|h| status_record(h, ObjectType::Switch, p.status))
                .collect();
            for (ocs, port) in path.ports() {
                recs.push(status_record(&format!("{ocs}/{port}"), ObjectType::Port, p.status));
            }
            for l in st.store.path_links(&path)? {
                recs.push(status_record(&l, ObjectType::Link, p.status));
            }
            recs.push(path_record(&path));
            Ok(((), recs))
        })?;
        Ok(json!({"svc_id": p.svc_id, "status": p.status}))
    }

    // ---- events, actions, handlers ----

    pub async fn add_event(&self, p: api::AddEvent) -> Result<Value, NbiError> {
        if p.event_id.is_empty() {
            return Err(NbiError::invalid_range("event_id is empty"));
        }
        check_threshold(p.threshold)?;
        {
            let st = self.state.lock().unwrap();
            if st.events.contains_key(&p.event_id) {
                return Err(NbiError::already_exist(format!("event {}", p.event_id)));
            }
            if let Some(n) = st.store.node(&p.ocs) {
                if !n.has_port(&p.port) {
                    return Err(NbiError::invalid_range(format!(
                        "port {} does not exist on {}",
                        p.port, p.ocs
                    )));
                }
            } else if st.store.is_terminal(&p.ocs) {
                if st.store.link_into(&p.ocs, &p.port).is_none() {
                    return Err(NbiError::invalid_range(format!(
                        "no strand arrives at {}/{}",
                        p.ocs, p.port
                    )));
                }
            } else {
                return Err(NbiError::not_found(format!("ocs {}", p.ocs)));
            }
        }
        let session = self
            .registry
            .get(&p.ocs)
            .ok_or_else(|| NbiError::not_found(format!("session to {}", p.ocs)))?;
        session
            .edit_config(Self::event_payload(&p.port, p.event_type, p.threshold))
            .await
            .map_err(|e| {
                NbiError::path_oper_failed(format!("{} rejected the alarm configuration: {e}", p.ocs))
            })?;
        let ev = EventSpec {
            event_id: p.event_id,
            event_type: p.event_type,
            ocs: p.ocs,
            port: p.port,
            threshold: p.threshold,
        };
        self.commit(|st| {
            if st.events.contains_key(&ev.event_id) {
                return Err(NbiError::already_exist(format!("event {}", ev.event_id)));
            }
            st.events.insert(ev.event_id.clone(), ev.clone());
            Ok(((), vec![put(RecordKind::Event, &ev)]))
        })?;
        info!(event = %ev.event_id, ocs = %ev.ocs, port = %ev.port, "event armed");
        Ok(to_value(&ev))
    }

    fn event_payload(port: &str, ty: EventType, threshold: f64) -> EditPayload {
        let (high, low) = match ty {
            EventType::SignalDetection => (Some(threshold), None),
            EventType::SignalDegradation => (None, Some(threshold)),
        };
        EditPayload {
            monitor: vec![MonitorConfig {
                port: port.to_string(),
                enabled: true,
                wavelength: None,
            }],
            alarm: vec![AlarmConfig {
                port: port.to_string(),
                high,
                low,
            }],
            ..Default::default()
        }
    }

    pub fn create_action(&self, a: ActionSpec) -> Result<Value, NbiError> {
        if a.act_id.is_empty() || a.svc_id.is_empty() {
            return Err(NbiError::invalid_range("act_id and svc_id must be non-empty"));
        }
        if let Some(alg) = &a.pce_alg {
            if !self.fpce.algorithms().any(|x| x == alg) {
                return Err(NbiError::invalid_range(format!("unknown path algorithm {alg:?}")));
            }
        }
        self.commit(|st| {
            if st.actions.contains_key(&a.act_id) {
                return Err(NbiError::already_exist(format!("action {}", a.act_id)));
            }
            for t in [&a.a, &a.z] {
                if !st.store.is_terminal(t) {
                    return Err(NbiError::not_found(format!("terminal {t}")));
                }
            }
            if a.a == a.z {
                return Err(NbiError::invalid_range("a and z must differ"));
            }
            for h in a.ocs_list.iter().flatten() {
                if !st.store.is_node(h) {
                    return Err(NbiError::not_found(format!("switch {h}")));
                }
            }
            st.actions.insert(a.act_id.clone(), a.clone());
            Ok(((), vec![put(RecordKind::Action, &a)]))
        })?;
        Ok(to_value(&a))
    }

    /// Removes the action and every handler bound to it.
    pub fn delete_action(&self, p: api::DeleteAction) -> Result<Value, NbiError> {
        self.commit(|st| {
            match st.actions.get(&p.act_id) {
                Some(a) if a.svc_id == p.svc_id => {}
                _ => {
                    return Err(NbiError::not_found(format!(
                        "action {} for {}",
                        p.act_id, p.svc_id
                    )))
                }
            }
            st.actions.remove(&p.act_id);
            let mut recs = vec![(RecordKind::Action, RecordOp::Delete, json!({ "act_id": p.act_id }))];
            let (gone, kept): (Vec<_>, Vec<_>) =
                std::mem::take(&mut st.handlers).into_iter().partition(|h| h.act_id() == p.act_id);
            st.handlers = kept;
            for h in gone {
                recs.push((RecordKind::Handler, RecordOp::Delete, to_value(&h)));
            }
            Ok(((), recs))
        })?;
        Ok(json!({"act_id": p.act_id}))
    }

    fn bind(&self, h: HandlerBinding, check: impl FnOnce(&DurableState) -> Result<(), NbiError>) -> Result<Value, NbiError> {
        self.commit(|st| {
            check(st)?;
            if !st.actions.contains_key(h.act_id()) {
                return Err(NbiError::not_found(format!("action {}", h.act_id())));
            }
            if st.handlers.contains(&h) {
                return Err(NbiError::already_exist("handler"));
            }
            st.handlers.push(h.clone());
            Ok(((), vec![put(RecordKind::Handler, &h)]))
        })?;
        Ok(to_value(&h))
    }

    pub fn create_event_handler(&self, p: api::CreateEventHandler) -> Result<Value, NbiError> {
        let event_id = p.event_id.clone();
        self.bind(
            HandlerBinding::Event {
                event_id: p.event_id,
                act_id: p.act_id,
            },
            |st| {
                if st.events.contains_key(&event_id) {
                    Ok(())
                } else {
                    Err(NbiError::not_found(format!("event {event_id}")))
                }
            },
        )
    }

    pub fn create_alarm_handler(&self, p: api::CreateAlarmHandler) -> Result<Value, NbiError> {
        let svc = p.svc_id.clone();
        self.bind(
            HandlerBinding::Alarm {
                svc_id: p.svc_id,
                act_id: p.act_id,
            },
            |st| {
                if st.store.path(&svc).is_some() {
                    Ok(())
                } else {
                    Err(NbiError::not_found(format!("path {svc}")))
                }
            },
        )
    }

    // ---- path alarms ----

    /// Terminal receive ports at the two ends of a path.
    pub(crate) fn endpoint_rx(store: &ResourceStore, path: &FiberPath) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let ends = [
            (path.hops.last(), forward_name(&path.svc_id), &path.z),
            (path.hops.first(), reverse_name(&path.svc_id), &path.a),
        ];
        for (hop, name, terminal) in ends {
            let Some(hop) = hop else { continue };
            let conn = path
                .per_ocs_configs
                .get(hop)
                .and_then(|cs| cs.iter().find(|c| c.name == name));
            if let Some(l) = conn.and_then(|c| store.link_from(hop, &c.tx)) {
                if &l.dst == terminal {
                    out.push((l.dst.clone(), l.dst_port.clone()));
                }
            }
        }
        out
    }

    /// Watches both endpoint terminals of `path` for loss of signal.
    pub(crate) async fn arm_path(&self, path: &FiberPath) {
        let endpoints = Self::endpoint_rx(&self.state.lock().unwrap().store, path);
        for (t, port) in &endpoints {
            let key = (t.clone(), port.clone());
            if self.los_ready.lock().unwrap().contains(&key) {
                continue;
            }
            let Some(s) = self.registry.get(t) else { continue };
            let payload = Self::event_payload(port, EventType::SignalDegradation, LOS_DBM);
            match s.edit_config(payload).await {
                Ok(()) => {
                    self.los_ready.lock().unwrap().insert(key);
                }
                Err(e) => warn!(terminal = %t, "cannot arm loss-of-signal alarm: {e}"),
            }
        }
        self.armed.lock().unwrap().insert(
            path.svc_id.clone(),
            ArmedPath {
                endpoints,
                since: ocs_sbi::unix_now(),
            },
        );
    }

    pub(crate) fn disarm(&self, svc: &str) {
        self.armed.lock().unwrap().remove(svc);
    }

    /// Re-applies device-side settings after a restart.
    async fn rearm_all(&self) {
        let (paths, events) = {
            let st = self.state.lock().unwrap();
            let paths: Vec<FiberPath> = st
                .store
                .paths()
                .filter(|p| p.status.is_available())
                .cloned()
                .collect();
            (paths, st.events.values().cloned().collect::<Vec<_>>())
        };
        for ev in events {
            if let Some(s) = self.registry.get(&ev.ocs) {
                if let Err(e) = s
                    .edit_config(Self::event_payload(&ev.port, ev.event_type, ev.threshold))
                    .await
                {
                    warn!(event = %ev.event_id, "cannot re-arm event: {e}");
                }
            }
        }
        for p in paths {
            self.arm_path(&p).await;
        }
    }

    /// Decodes parameters and runs a typed call; used by the dispatcher
    /// for actions.
    pub(crate) async fn run_action_create(&self, a: &ActionSpec) -> Result<(), NbiError> {
        self.create_fiber_path(PathParams::from(a)).await.map(|_| ())
    }

    pub(crate) async fn run_action_restore(&self, a: &ActionSpec) -> Result<(), NbiError> {
        self.restore_fiber_path(PathParams::from(a)).await.map(|_| ())
    }

    /// Finds the strand most likely responsible for `terminal` losing
    /// light on path `svc`: the first dark ingress along the direction
    /// that feeds it, or the final strand if every hop still sees light.
    pub(crate) async fn locate_failure(&self, svc: &str, terminal: &str) -> Option<String> {
        let (path, final_strand) = {
            let st = self.state.lock().unwrap();
            let path = st.store.path(svc)?.clone();
            let fin = Self::endpoint_rx(&st.store, &path)
                .into_iter()
                .find(|(t, _)| t == terminal)
                .and_then(|(t, p)| st.store.link_into(&t, &p).map(|l| l.id.clone()));
            (path, fin)
        };
        let forward = path.z == terminal;
        let name = if forward {
            forward_name(svc)
        } else {
            reverse_name(svc)
        };
        let mut order: Vec<(String, String)> = path
            .hops
            .iter()
            .filter_map(|h| {
                let c = path.per_ocs_configs.get(h)?.iter().find(|c| c.name == name)?;
                Some((h.clone(), c.rx.clone()))
            })
            .collect();
        if !forward {
            order.reverse();
        }
        let mut set = JoinSet::new();
        for (i, (hop, rx)) in order.iter().cloned().enumerate() {
            let s = self.registry.get(&hop);
            set.spawn(async move {
                let Some(s) = s else { return (i, None) };
                let payload = EditPayload {
                    monitor: vec![MonitorConfig {
                        port: rx.clone(),
                        enabled: true,
                        wavelength: None,
                    }],
                    ..Default::default()
                };
                if s.edit_config(payload).await.is_err() {
                    return (i, None);
                }
                (i, s.get_state().await.ok().and_then(|st| st.power_of(&rx)))
            });
        }
        let mut readings = vec![None; order.len()];
        for (i, p) in set.join_all().await {
            readings[i] = p;
        }
        let dark = readings.iter().position(|p| p.is_none_or(|dbm| dbm < LOS_DBM));
        let st = self.state.lock().unwrap();
        match dark {
            Some(i) => st.store.link_into(&order[i].0, &order[i].1).map(|l| l.id.clone()),
            None => final_strand,
        }
    }
}
