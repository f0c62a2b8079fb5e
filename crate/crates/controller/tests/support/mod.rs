#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use ocs_controller::api::CreateNetwork;
use ocs_controller::{Controller, ControllerConfig};
use ocs_emulator::{Fleet, FleetConfig};
use ocs_model::{TopologyBuilder, TopologyDoc};

pub const WAIT: Duration = Duration::from_secs(5);

/// Five switches, two terminals: A on OCS1, Z on OCS5, with three routes
/// of increasing length between them.
pub fn fig7() -> TopologyDoc {
    let mut b = TopologyBuilder::new();
    for i in 1..=5 {
        b = b.switch(&format!("OCS{i}"));
    }
    b.terminal("A")
        .terminal("Z")
        .duplex("A", "OCS1")
        .duplex("OCS1", "OCS3")
        .duplex("OCS1", "OCS2")
        .duplex("OCS2", "OCS3")
        .duplex("OCS2", "OCS4")
        .duplex("OCS4", "OCS3")
        .duplex("OCS3", "OCS5")
        .duplex("OCS5", "Z")
        .build()
}

pub fn hops(h: &[&str]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

pub struct Rig {
    pub fleet: Fleet,
    pub ctl: Arc<Controller>,
}

impl Rig {
    pub async fn start(topo: TopologyDoc) -> Rig {
        Self::with(FleetConfig::new(topo), ControllerConfig::default().without_health_checks()).await
    }

    pub async fn with(fleet: FleetConfig, cfg: ControllerConfig) -> Rig {
        let fleet = Fleet::launch(fleet).await.expect("fleet launches");
        let ctl = Controller::start(cfg).await.expect("controller starts");
        register(&ctl, &fleet).await;
        Rig { fleet, ctl }
    }

    pub async fn stop(self) -> Fleet {
        self.ctl.shutdown().await;
        self.fleet
    }
}

pub async fn register(ctl: &Controller, fleet: &Fleet) {
    let doc = serde_json::to_value(fleet.topology()).unwrap();
    ctl.create_network(CreateNetwork { topology_file: doc })
        .await
        .expect("network registers");
}

/// A controller persisting into `dir`, restarted on the same state.
pub async fn restart(dir: &Path, tweak: impl FnOnce(ControllerConfig) -> ControllerConfig) -> Arc<Controller> {
    Controller::start(tweak(ControllerConfig::in_dir(dir).without_health_checks()))
        .await
        .expect("controller restarts")
}

/// Polls `f` until it holds or `WAIT` elapses.
pub async fn eventually(mut f: impl FnMut() -> bool) -> bool {
    let t0 = tokio::time::Instant::now();
    while t0.elapsed() < WAIT {
        if f() {
            return true;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    f()
}
