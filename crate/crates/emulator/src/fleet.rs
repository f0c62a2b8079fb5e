//! A whole emulated network: one vendor emulator plus translator per switch,
//! one unified-protocol terminal per terminal, all wired into one fabric.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;
use std::time::Duration;

use ocs_model::TopologyDoc;
use ocs_sbi::{converter_for, serve, ServerHandle, Translator, UnifiedDevice, Vendor, DEFAULT_RPC_TIMEOUT};
use tokio::net::TcpListener;

use crate::device::{start_emulator, DeviceSnapshot, OcsEmulator, RequestCounts};
use crate::fabric::Fabric;
use crate::profile::{EmulatorProfile, FaultMode, LatencyModel};
use crate::terminal::TerminalEmulator;

#[derive(Debug, Clone)]
pub struct FleetConfig {
    pub topology: TopologyDoc,
    /// Switches not listed here cycle through A, B, C in topology order.
    pub vendors: BTreeMap<String, Vendor>,
    pub latency: LatencyModel,
    pub latency_overrides: BTreeMap<String, LatencyModel>,
    pub faults: BTreeMap<String, FaultMode>,
    pub seed: u64,
    pub translator_timeout: Duration,
    pub bind_host: String,
}

impl FleetConfig {
    pub fn new(topology: TopologyDoc) -> Self {
        FleetConfig {
            topology,
            vendors: BTreeMap::new(),
            latency: LatencyModel::ZERO,
            latency_overrides: BTreeMap::new(),
            faults: BTreeMap::new(),
            seed: 0,
            translator_timeout: DEFAULT_RPC_TIMEOUT,
            bind_host: "127.0.0.1".into(),
        }
    }

    pub fn with_latency(mut self, latency: LatencyModel) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_vendor(mut self, switch: &str, vendor: Vendor) -> Self {
        self.vendors.insert(switch.into(), vendor);
        self
    }

    pub fn with_fault(mut self, switch: &str, fault: FaultMode) -> Self {
        self.faults.insert(switch.into(), fault);
        self
    }

    pub fn vendor_of(&self, index: usize, switch: &str) -> Vendor {
        self.vendors
            .get(switch)
            .copied()
            .unwrap_or(Vendor::ALL[index % Vendor::ALL.len()])
    }
}

pub struct Fleet {
    devices: BTreeMap<String, OcsEmulator>,
    translators: BTreeMap<String, (Arc<Translator>, ServerHandle)>,
    terminals: BTreeMap<String, (TerminalEmulator, ServerHandle)>,
    fabric: Fabric,
    view: TopologyDoc,
}

impl Fleet {
    pub async fn launch(cfg: FleetConfig) -> io::Result<Fleet> {
        let fabric = Fabric::new();
        let mut view = cfg.topology.clone();
        let mut devices = BTreeMap::new();
        let mut translators = BTreeMap::new();
        let mut terminals = BTreeMap::new();
        let any = format!("{}:0", cfg.bind_host);

        for (i, sw) in view.switches.iter_mut().enumerate() {
            let vendor = cfg.vendor_of(i, &sw.id);
            let profile = EmulatorProfile::new(vendor)
                .with_ports(sw.rx_ports.clone(), sw.tx_ports.clone())
                .with_latency(*cfg.latency_overrides.get(&sw.id).unwrap_or(&cfg.latency))
                .with_fault(cfg.faults.get(&sw.id).copied().unwrap_or_default())
                .with_seed(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            let dev = start_emulator(sw.id.clone(), profile, &any).await?;
            fabric.add_device(dev.clone());

            let tr = Arc::new(Translator::new(
                converter_for(vendor),
                dev.addr().to_string(),
                cfg.translator_timeout,
            ));
            // best effort: a device that starts down is reached on first use
            let _ = tr.hello().await;
            let listener = TcpListener::bind(&any).await?;
            let handle = serve(listener, tr.clone());
            sw.host = handle.addr().ip().to_string();
            sw.port = handle.addr().port().into();
            translators.insert(sw.id.clone(), (tr, handle));
            devices.insert(sw.id.clone(), dev);
        }
        for t in view.terminals.iter_mut() {
            let term = TerminalEmulator::new(t.id.clone());
            fabric.add_terminal(term.clone());
            let handle = term.serve(TcpListener::bind(&any).await?);
            t.host = handle.addr().ip().to_string();
            t.port = handle.addr().port().into();
            terminals.insert(t.id.clone(), (term, handle));
        }
        for l in &view.links {
            fabric.add_link(&l.to_link());
        }
        fabric.recompute();
        Ok(Fleet {
            devices,
            translators,
            terminals,
            fabric,
            view,
        })
    }

    /// The topology with every switch and terminal pointing at its unified
    /// endpoint, ready to hand to a controller.
    pub fn topology(&self) -> &TopologyDoc {
        &self.view
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn device(&self, id: &str) -> Option<&OcsEmulator> {
        self.devices.get(id)
    }

    pub fn devices(&self) -> impl Iterator<Item = &OcsEmulator> {
        self.devices.values()
    }

    pub fn terminal(&self, id: &str) -> Option<&TerminalEmulator> {
        self.terminals.get(id).map(|(t, _)| t)
    }

    pub fn translator(&self, id: &str) -> Option<&Arc<Translator>> {
        self.translators.get(id).map(|(t, _)| t)
    }

    pub async fn set_fault(&self, id: &str, mode: FaultMode) -> io::Result<()> {
        match self.devices.get(id) {
            Some(d) => d.set_fault(mode).await,
            None => Err(io::Error::new(io::ErrorKind::NotFound, format!("no device {id}"))),
        }
    }

    pub async fn clear_faults(&self) -> io::Result<()> {
        for d in self.devices.values() {
            d.set_fault(FaultMode::None).await?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> BTreeMap<String, DeviceSnapshot> {
        self.devices
            .iter()
            .map(|(id, d)| (id.clone(), d.snapshot()))
            .collect()
    }

    /// Cross-connects per device, the part of the state paths are made of.
    pub fn connection_state(&self) -> BTreeMap<String, Vec<ocs_model::InternalConnection>> {
        self.devices
            .iter()
            .map(|(id, d)| (id.clone(), d.connections()))
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<String, RequestCounts> {
        self.devices
            .iter()
            .map(|(id, d)| (id.clone(), d.counts()))
            .collect()
    }

    pub fn shutdown(&self) {
        for d in self.devices.values() {
            d.shutdown();
        }
        for (_, h) in self.translators.values() {
            h.shutdown();
        }
        for (_, h) in self.terminals.values() {
            h.shutdown();
        }
    }
}

impl Drop for Fleet {
    fn drop(&mut self) {
        self.shutdown();
        for d in self.devices.values() {
            d.set_change_hook(None);
        }
    }
}
