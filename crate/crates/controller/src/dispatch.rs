//! Notification dispatch and device health checks.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Weak;
use std::time::{Duration, Instant};

use ocs_model::{NbiError, ObjectType, ResourceStatus};
use ocs_sbi::{AlarmKind, Notification, SessionEvent};
use serde::Serialize;
use tokio::sync::mpsc;
use tokio::task::JoinSet;
use tracing::{debug, info, warn};

use crate::core::Controller;
use crate::events::{ActionSpec, EventType, HandlerBinding};

#[derive(Debug, Default)]
pub struct DispatchStats {
    received: AtomicU64,
    dispatched: AtomicU64,
    coalesced: AtomicU64,
    unmatched: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DispatchCounts {
    pub received: u64,
    pub dispatched: u64,
    pub coalesced: u64,
    pub unmatched: u64,
}

impl DispatchStats {
    pub fn counts(&self) -> DispatchCounts {
        DispatchCounts {
            received: self.received.load(Ordering::SeqCst),
            dispatched: self.dispatched.load(Ordering::SeqCst),
            coalesced: self.coalesced.load(Ordering::SeqCst),
            unmatched: self.unmatched.load(Ordering::SeqCst),
        }
    }
}

enum Job {
    Create,
    /// Restore after a switch-side degradation; the strand feeding the
    /// alarming port is known.
    RestoreAfter(Option<String>),
    /// Restore after an endpoint terminal lost light on a path.
    RestoreLocate { svc: String, terminal: String },
}

pub(crate) async fn run_dispatcher(me: Weak<Controller>, mut rx: mpsc::UnboundedReceiver<SessionEvent>) {
    while let Some(ev) = rx.recv().await {
        let Some(ctl) = me.upgrade() else { break };
        if ctl.is_halted() {
            continue;
        }
        match ev {
            SessionEvent::Notification {
                device,
                notification,
            } => {
                ctl.on_notification(&device, &notification);
            }
            SessionEvent::Lost { device } => {
                let ctl = ctl.clone();
                tokio::spawn(async move { ctl.on_session_lost(&device).await });
            }
        }
    }
}

pub(crate) async fn run_health(me: Weak<Controller>, every: Duration) {
    let mut tick = tokio::time::interval(every);
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    tick.tick().await;
    loop {
        tick.tick().await;
        let Some(ctl) = me.upgrade() else { break };
        if !ctl.is_halted() {
            ctl.health_pass().await;
        }
    }
}

impl Controller {
    pub fn dispatch_counts(&self) -> DispatchCounts {
        self.stats.counts()
    }

    /// Routes one device notification to every matching handler and
    /// returns how many actions were started.
    pub fn on_notification(&self, device: &str, n: &Notification) -> usize {
        self.stats.received.fetch_add(1, Ordering::SeqCst);
        let mut jobs: Vec<(String, String, ActionSpec, Job)> = Vec::new();
        {
            let st = self.state.lock().unwrap();
            for ev in st
                .events
                .values()
                .filter(|e| e.ocs == device && e.port == n.port && e.event_type.matches(n.kind))
            {
                for h in &st.handlers {
                    let HandlerBinding::Event { event_id, act_id } = h else { continue };
                    if event_id != &ev.event_id {
                        continue;
                    }
                    let Some(act) = st.actions.get(act_id) else { continue };
                    let job = match ev.event_type {
                        EventType::SignalDetection => Job::Create,
                        EventType::SignalDegradation => {
                            Job::RestoreAfter(st.store.link_into(device, &n.port).map(|l| l.id.clone()))
                        }
                    };
                    jobs.push((format!("event:{event_id}:{act_id}"), ev.event_id.clone(), act.clone(), job));
                }
            }
            if n.kind == AlarmKind::SignalDegraded && st.store.is_terminal(device) {
                let armed = self.armed.lock().unwrap();
                for (svc, arm) in armed.iter() {
                    let watched = arm.endpoints.iter().any(|(t, p)| t == device && p == &n.port);
                    if !watched || n.ts < arm.since {
                        continue;
                    }
                    for h in &st.handlers {
                        let HandlerBinding::Alarm { svc_id, act_id } = h else { continue };
                        if svc_id != svc {
                            continue;
                        }
                        let Some(act) = st.actions.get(act_id) else { continue };
                        jobs.push((
                            format!("alarm:{svc}:{act_id}"),
                            format!("alarm:{svc}"),
                            act.clone(),
                            Job::RestoreLocate {
                                svc: svc.clone(),
                                terminal: device.to_string(),
                            },
                        ));
                    }
                }
            }
        }
        if jobs.is_empty() {
            self.stats.unmatched.fetch_add(1, Ordering::SeqCst);
            debug!(%device, port = %n.port, kind = ?n.kind, "notification matched nothing");
            return 0;
        }
        let mut started = 0;
        for (key, trigger, act, job) in jobs {
            if !self.busy_triggers.lock().unwrap().insert(key.clone()) {
                self.stats.coalesced.fetch_add(1, Ordering::SeqCst);
                debug!(%key, "coalesced with an action in flight");
                continue;
            }
            self.stats.dispatched.fetch_add(1, Ordering::SeqCst);
            started += 1;
            let ctl = self.arc();
            tokio::spawn(async move {
                let t0 = Instant::now();
                let res = ctl.run_job(&act, job).await;
                let outcome = match &res {
                    Ok(()) => "OK".to_string(),
                    Err(e) => {
                        warn!(act = %act.act_id, "action failed: {e}");
                        e.code.as_str().to_string()
                    }
                };
                ctl.busy_triggers.lock().unwrap().remove(&key);
                ctl.journal.record(&trigger, &act, &outcome, t0.elapsed());
            });
        }
        started
    }

    async fn run_job(&self, act: &ActionSpec, job: Job) -> Result<(), NbiError> {
        let failed = match job {
            Job::Create => return self.run_action_create(act).await,
            Job::RestoreAfter(link) => link,
            Job::RestoreLocate { svc, terminal } => self.locate_failure(&svc, &terminal).await,
        };
        if let Some(l) = failed {
            match self.set_status(&l, ObjectType::Link, ResourceStatus::Unavailable) {
                Ok(()) => info!(link = %l, "degraded strand marked UNAVAILABLE"),
                Err(e) => warn!(link = %l, "cannot mark strand: {e}"),
            }
        }
        self.run_action_restore(act).await
    }

    async fn on_session_lost(&self, device: &str) {
        let Some(s) = self.registry.get(device) else { return };
        if s.hello().await.is_err() {
            self.mark_down(device);
        }
    }

    fn object_type(&self, id: &str) -> Option<(ObjectType, ResourceStatus)> {
        let st = self.state.lock().unwrap();
        if let Some(n) = st.store.node(id) {
            return Some((ObjectType::Switch, n.status));
        }
        st.store.terminal(id).map(|t| (ObjectType::Terminal, t.status))
    }

    fn mark_down(&self, id: &str) {
        let Some((ty, status)) = self.object_type(id) else { return };
        if !status.is_available() {
            return;
        }
        match self.set_status(id, ty, ResourceStatus::Unavailable) {
            Ok(()) => {
                warn!(device = %id, "device unreachable, marked UNAVAILABLE");
                self.health_down.lock().unwrap().insert(id.to_string());
            }
            Err(e) => warn!(device = %id, "cannot mark device: {e}"),
        }
    }

    /// Says hello to every device once.
    pub async fn health_pass(&self) {
        let mut set = JoinSet::new();
        for s in self.registry.all() {
            set.spawn(async move { (s.device().to_string(), s.hello().await.is_ok()) });
        }
        for (id, up) in set.join_all().await {
            if !up {
                self.mark_down(&id);
                continue;
            }
            if !self.cfg.auto_restore_on_hello || !self.health_down.lock().unwrap().contains(&id) {
                continue;
            }
            let Some((ty, _)) = self.object_type(&id) else { continue };
            if self.set_status(&id, ty, ResourceStatus::Available).is_ok() {
                info!(device = %id, "device back, marked AVAILABLE");
                self.health_down.lock().unwrap().remove(&id);
            }
        }
    }
}
