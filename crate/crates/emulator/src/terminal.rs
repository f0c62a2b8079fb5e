//! Two-port terminal (laser on `tx`, receiver on `rx`) speaking the unified
//! protocol directly, so path failures can be reported from the edge.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use ocs_model::{check_threshold, InternalConnection};
use ocs_sbi::{
    serve, AlarmKind, EditPayload, Level, MonitorConfig, Notification, PowerReading, ServerHandle,
    StateReply, UnifiedDevice,
};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use crate::alarm::{Thresholds, DARK_DBM};
use crate::device::ChangeHook;

pub const TX_PORT: &str = "tx";
pub const RX_PORT: &str = "rx";

struct TermState {
    laser: Option<f64>,
    rx: f64,
    monitors: BTreeMap<String, MonitorConfig>,
    alarms: BTreeMap<String, Thresholds>,
}

struct Term {
    id: String,
    state: Mutex<TermState>,
    events: broadcast::Sender<Notification>,
    hook: Mutex<Option<ChangeHook>>,
    reads: AtomicU64,
}

#[derive(Clone)]
pub struct TerminalEmulator(Arc<Term>);

impl TerminalEmulator {
    pub fn new(id: impl Into<String>) -> Self {
        let (events, _) = broadcast::channel(256);
        TerminalEmulator(Arc::new(Term {
            id: id.into(),
            state: Mutex::new(TermState {
                laser: None,
                rx: DARK_DBM,
                monitors: BTreeMap::new(),
                alarms: BTreeMap::new(),
            }),
            events,
            hook: Mutex::new(None),
            reads: AtomicU64::new(0),
        }))
    }

    /// Serves the unified protocol for this terminal on `listener`.
    pub fn serve(&self, listener: TcpListener) -> ServerHandle {
        serve(listener, Arc::new(self.clone()))
    }

    pub fn id(&self) -> &str {
        &self.0.id
    }

    /// `Some(dbm)` turns the laser on at that launch power.
    pub fn set_laser(&self, launch: Option<f64>) {
        self.0.state.lock().unwrap().laser = launch;
        let hook = self.0.hook.lock().unwrap().clone();
        if let Some(h) = hook {
            h();
        }
    }

    pub fn laser(&self) -> Option<f64> {
        self.0.state.lock().unwrap().laser
    }

    pub fn rx_power(&self) -> f64 {
        self.0.state.lock().unwrap().rx
    }

    pub fn reads(&self) -> u64 {
        self.0.reads.load(Ordering::Relaxed)
    }

    pub fn set_change_hook(&self, hook: Option<ChangeHook>) {
        *self.0.hook.lock().unwrap() = hook;
    }

    pub(crate) fn apply_rx(&self, dbm: f64) {
        let dbm = dbm.max(DARK_DBM);
        let fired = {
            let mut st = self.0.state.lock().unwrap();
            let old = std::mem::replace(&mut st.rx, dbm);
            let monitored = st.monitors.get(RX_PORT).is_some_and(|m| m.enabled);
            st.alarms
                .get(RX_PORT)
                .filter(|_| monitored)
                .and_then(|t| t.crossing(old, dbm))
        };
        if let Some(level) = fired {
            let kind = match level {
                Level::Hi => AlarmKind::SignalDetected,
                Level::Lo => AlarmKind::SignalDegraded,
            };
            let _ = self.0.events.send(Notification::now(RX_PORT, kind, dbm));
        }
    }
}

#[async_trait]
impl UnifiedDevice for TerminalEmulator {
    async fn edit_config(&self, payload: EditPayload) -> Result<(), String> {
        if !payload.create.is_empty() || !payload.delete.is_empty() {
            return Err(format!("terminal {} has no cross-connects", self.0.id));
        }
        let known = |p: &str| p == TX_PORT || p == RX_PORT;
        let mut st = self.0.state.lock().unwrap();
        for m in &payload.monitor {
            if !known(&m.port) {
                return Err(format!("unknown port {}", m.port));
            }
        }
        for a in &payload.alarm {
            if !known(&a.port) {
                return Err(format!("unknown port {}", a.port));
            }
            for v in [a.high, a.low].into_iter().flatten() {
                check_threshold(v).map_err(|e| e.message)?;
            }
            let enabled = payload.monitor.iter().any(|m| m.port == a.port && m.enabled)
                || st.monitors.get(&a.port).is_some_and(|m| m.enabled);
            if !enabled {
                return Err(format!("monitor disabled on port {}", a.port));
            }
        }
        for m in payload.monitor {
            st.monitors.insert(m.port.clone(), m);
        }
        for a in payload.alarm {
            st.alarms.entry(a.port).or_default().merge(a.high, a.low);
        }
        Ok(())
    }

    async fn get_state(&self) -> Result<StateReply, String> {
        self.0.reads.fetch_add(1, Ordering::Relaxed);
        let st = self.0.state.lock().unwrap();
        let power = st
            .monitors
            .values()
            .filter(|m| m.enabled)
            .map(|m| PowerReading {
                port: m.port.clone(),
                dbm: if m.port == RX_PORT {
                    st.rx
                } else {
                    st.laser.unwrap_or(DARK_DBM)
                },
                wavelength: m.wavelength,
            })
            .collect();
        Ok(StateReply {
            connections: Vec::new(),
            power,
        })
    }

    async fn get_config(&self) -> Result<Vec<InternalConnection>, String> {
        Ok(Vec::new())
    }

    async fn hello(&self) -> Result<(), String> {
        Ok(())
    }

    fn notifications(&self) -> broadcast::Receiver<Notification> {
        self.0.events.subscribe()
    }
}
