//! Fiber wiring between emulated devices and lossless light propagation.
//!
//! Every lasing terminal's launch power is traced strand by strand through
//! the cross-connects currently applied on each device; any rx port no light
//! reaches reads as dark. Recomputation is triggered by device changes,
//! laser changes and strand pulls, and alarm crossings fall out of the power
//! updates it applies.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, Weak};

use ocs_model::FiberLink;

use crate::alarm::DARK_DBM;
use crate::device::OcsEmulator;
use crate::terminal::{TerminalEmulator, RX_PORT, TX_PORT};

struct Strand {
    id: String,
    dst: String,
    dst_port: String,
}

#[derive(Default)]
struct Wiring {
    devices: BTreeMap<String, OcsEmulator>,
    terminals: BTreeMap<String, TerminalEmulator>,
    strands: BTreeMap<(String, String), Strand>,
    pulled: BTreeSet<String>,
}

#[derive(Clone, Default)]
pub struct Fabric(Arc<Mutex<Wiring>>);

impl Fabric {
    pub fn new() -> Self {
        Fabric::default()
    }

    fn hook(&self) -> Arc<dyn Fn() + Send + Sync> {
        let weak: Weak<Mutex<Wiring>> = Arc::downgrade(&self.0);
        Arc::new(move || {
            if let Some(w) = weak.upgrade() {
                Fabric(w).recompute();
            }
        })
    }

    pub fn add_device(&self, dev: OcsEmulator) {
        dev.set_change_hook(Some(self.hook()));
        self.0.lock().unwrap().devices.insert(dev.id().to_string(), dev);
    }

    pub fn add_terminal(&self, t: TerminalEmulator) {
        t.set_change_hook(Some(self.hook()));
        self.0.lock().unwrap().terminals.insert(t.id().to_string(), t);
    }

    pub fn add_link(&self, link: &FiberLink) {
        self.0.lock().unwrap().strands.insert(
            (link.src.clone(), link.src_port.clone()),
            Strand {
                id: link.id.clone(),
                dst: link.dst.clone(),
                dst_port: link.dst_port.clone(),
            },
        );
    }

    /// Simulates pulling a strand out of its connector.
    pub fn pull(&self, link_id: &str) {
        self.0.lock().unwrap().pulled.insert(link_id.to_string());
        self.recompute();
    }

    pub fn plug(&self, link_id: &str) {
        self.0.lock().unwrap().pulled.remove(link_id);
        self.recompute();
    }

    pub fn is_pulled(&self, link_id: &str) -> bool {
        self.0.lock().unwrap().pulled.contains(link_id)
    }

    pub fn recompute(&self) {
        let w = self.0.lock().unwrap();
        let mut arriving: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
        let mut cross: BTreeMap<&str, BTreeMap<String, String>> = BTreeMap::new();
        for (id, dev) in &w.devices {
            arriving.insert(id, dev.rx_ports().map(|p| (p.to_string(), DARK_DBM)).collect());
            cross.insert(id, dev.connections().into_iter().map(|c| (c.rx, c.tx)).collect());
        }
        for id in w.terminals.keys() {
            arriving.insert(id, BTreeMap::from([(RX_PORT.to_string(), DARK_DBM)]));
        }

        for (src, term) in &w.terminals {
            let Some(launch) = term.laser() else { continue };
            let mut at = (src.clone(), TX_PORT.to_string());
            let mut seen = BTreeSet::new();
            while seen.insert(at.clone()) {
                let Some(s) = w.strands.get(&at) else { break };
                if w.pulled.contains(&s.id) {
                    break;
                }
                if let Some(ports) = arriving.get_mut(s.dst.as_str()) {
                    let e = ports.entry(s.dst_port.clone()).or_insert(DARK_DBM);
                    *e = e.max(launch);
                }
                match cross.get(s.dst.as_str()).and_then(|c| c.get(&s.dst_port)) {
                    Some(tx) => at = (s.dst.clone(), tx.clone()),
                    None => break,
                }
            }
        }

        for (id, dev) in &w.devices {
            dev.apply_powers(&arriving[id.as_str()]);
        }
        for (id, t) in &w.terminals {
            t.apply_rx(arriving[id.as_str()][RX_PORT]);
        }
    }
}
