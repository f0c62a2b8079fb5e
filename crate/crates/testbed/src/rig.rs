//! An emulated fleet with a controller in front of it, reachable over the
//! northbound interface.

use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use ocs_controller::api::{self, CreateNetwork};
use ocs_controller::{serve, Controller, ControllerConfig, NbiClient, NbiServer};
use ocs_emulator::{Fleet, FleetConfig, LatencyModel};
use serde_json::{json, Value};
use tokio::net::TcpListener;

/// Switch actuation latency for timing runs: normal, mean 0.7 s, sd 0.07 s.
pub fn reference_latency() -> LatencyModel {
    LatencyModel::normal(0.7, 0.07)
}

/// A controller configuration without background health probes, so that
/// measurements see only the traffic they cause.
pub fn quiet_controller() -> ControllerConfig {
    ControllerConfig::default().without_health_checks()
}

pub struct Testbed {
    pub fleet: Fleet,
    pub ctl: Arc<Controller>,
    pub client: NbiClient,
    server: NbiServer,
}

impl Testbed {
    pub async fn launch(fleet: FleetConfig, cfg: ControllerConfig) -> anyhow::Result<Testbed> {
        let fleet = Fleet::launch(fleet).await.context("launching fleet")?;
        let ctl = Controller::start(cfg).await.context("starting controller")?;
        Self::attach(fleet, ctl, true).await
    }

    /// Wraps an already started controller; `register` loads the fleet's
    /// topology into it.
    pub async fn attach(fleet: Fleet, ctl: Arc<Controller>, register: bool) -> anyhow::Result<Testbed> {
        let server = serve(TcpListener::bind("127.0.0.1:0").await?, ctl.clone())?;
        let client = NbiClient::connect(&server.addr().to_string(), Duration::from_secs(60)).await?;
        if register {
            ctl.create_network(CreateNetwork {
                topology_file: serde_json::to_value(fleet.topology())?,
            })
            .await?;
        }
        Ok(Testbed {
            fleet,
            ctl,
            client,
            server,
        })
    }

    pub fn nbi_addr(&self) -> std::net::SocketAddr {
        self.server.addr()
    }

    pub async fn call(&self, method: &str, params: Value) -> anyhow::Result<Value> {
        Ok(self.client.call(method, params).await?)
    }

    pub async fn set_status(&self, id: &str, object_type: &str, status: &str) -> anyhow::Result<()> {
        self.call(
            api::UPDATE_RESOURCE_STATUS,
            json!({"object_id": id, "object_type": object_type, "status": status}),
        )
        .await
        .map(drop)
    }

    /// Stops the controller and hands back the fleet.
    pub async fn detach(self) -> Fleet {
        self.server.shutdown();
        self.ctl.shutdown().await;
        self.fleet
    }

    pub async fn shutdown(self) {
        let fleet = self.detach().await;
        fleet.shutdown();
    }
}

/// Polls `cond` every millisecond; returns the time it took to hold.
pub async fn wait_for(timeout: Duration, mut cond: impl FnMut() -> bool) -> Option<Duration> {
    let t0 = Instant::now();
    loop {
        if cond() {
            return Some(t0.elapsed());
        }
        if t0.elapsed() > timeout {
            return None;
        }
        tokio::time::sleep(Duration::from_millis(1)).await;
    }
}

pub async fn timed<T>(f: impl Future<Output = T>) -> (T, f64) {
    let t0 = Instant::now();
    let out = f.await;
    (out, t0.elapsed().as_secs_f64())
}
