//! Experiment scenarios. Each returns one record per measurement; records
//! serialize to CSV rows whose columns match the corresponding figure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure};
use ocs_controller::api::{self, PathParams};
use ocs_controller::{Controller, ControllerConfig, KillPoint, PathVerdict, ReconcilePolicy};
use ocs_emulator::{DeviceSnapshot, FaultMode, Fleet, FleetConfig, LatencyModel};
use ocs_model::{InternalConnection, TopologyBuilder};
use ocs_sbi::{converter_for, EditPayload, SbiSession, VendorClient, VendorCommand};
use serde::Serialize;
use serde_json::json;

use crate::rig::{reference_latency, quiet_controller, timed, wait_for, Testbed};
use crate::topo::{self, R3, ROUTES};

const SLOW: Duration = Duration::from_secs(30);

pub fn to_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: impl IntoIterator<Item = f64>) -> Summary {
    let xs: Vec<f64> = xs.into_iter().collect();
    let count = xs.len();
    let mean = if count == 0 { f64::NAN } else { xs.iter().sum::<f64>() / count as f64 };
    Summary {
        count,
        mean,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn path(svc: &str, hops: &[&str]) -> PathParams {
    PathParams::new(svc, "A", "Z").via(hops.iter().copied())
}

// ---- path control ----

#[derive(Debug, Clone, Serialize)]
pub struct PathOpSample {
    pub route: String,
    pub run: usize,
    pub op: &'static str,
    pub secs: f64,
}

pub async fn fig9(runs: usize, seed: u64) -> anyhow::Result<Vec<PathOpSample>> {
    let fleet = FleetConfig::new(topo::fig7()).with_latency(reference_latency()).with_seed(seed);
    let tb = Testbed::launch(fleet, quiet_controller()).await?;
    let mut out = Vec::new();
    for (name, hops) in ROUTES {
        for run in 0..runs {
            let svc = format!("{name}-{run}");
            let (r, secs) = timed(tb.client.create_fiber_path(&path(&svc, hops))).await;
            let p = r?;
            ensure!(p.hops == hops, "{svc} took {:?}", p.hops);
            out.push(PathOpSample {
                route: name.into(),
                run,
                op: "create",
                secs,
            });
            let (r, secs) = timed(tb.client.delete_fiber_path(&svc)).await;
            r?;
            out.push(PathOpSample {
                route: name.into(),
                run,
                op: "delete",
                secs,
            });
        }
    }
    tb.shutdown().await;
    Ok(out)
}

// ---- rollback ----

#[derive(Debug, Clone, Serialize)]
pub struct RollbackSample {
    pub failed_switches: usize,
    pub run: usize,
    pub down: String,
    pub outcome: String,
    pub rollback_s: Option<f64>,
    pub healthy_unchanged: bool,
}

pub async fn fig10(runs: usize, seed: u64) -> anyhow::Result<Vec<RollbackSample>> {
    let fleet = FleetConfig::new(topo::fig7()).with_latency(reference_latency()).with_seed(seed);
    let tb = Testbed::launch(fleet, quiet_controller()).await?;
    let mut out = Vec::new();
    for m in 1..=3 {
        for run in 0..runs {
            let down: Vec<&str> = (0..m).map(|i| R3[(run + i) % R3.len()]).collect();
            let before: BTreeMap<String, DeviceSnapshot> = tb
                .fleet
                .snapshot()
                .into_iter()
                .filter(|(id, _)| !down.contains(&id.as_str()))
                .collect();
            for d in &down {
                tb.fleet.set_fault(d, FaultMode::ServerDown).await?;
            }
            let res = tb.client.create_fiber_path(&path(&format!("rb-{m}-{run}"), R3)).await;
            let after = tb.fleet.snapshot();
            let healthy_unchanged = before.iter().all(|(id, s)| after.get(id) == Some(s));
            let outcome = match &res {
                Ok(_) => "OK".to_string(),
                Err(e) => e.code().map_or_else(|| e.to_string(), |c| c.as_str().to_string()),
            };
            let rollback_s = tb.ctl.last_execution().and_then(|r| r.rollback_s);
            out.push(RollbackSample {
                failed_switches: m,
                run,
                down: down.join(" "),
                outcome,
                rollback_s,
                healthy_unchanged,
            });
            tb.fleet.clear_faults().await?;
            if res.is_ok() {
                tb.client.delete_fiber_path(&format!("rb-{m}-{run}")).await?;
            }
            for d in &down {
                tb.set_status(d, "ocs", "AVAILABLE").await?;
            }
        }
    }
    tb.shutdown().await;
    Ok(out)
}

// ---- event-driven control ----

#[derive(Debug, Clone, Serialize)]
pub struct DetectionSample {
    pub route: String,
    pub run: usize,
    pub secs: f64,
    pub z_rx_dbm: f64,
    pub action_s: f64,
}

pub const DETECTION_HIGH_DBM: f64 = -1.0;
pub const LAUNCH_DBM: f64 = 5.9;
pub const DEGRADATION_LOW_DBM: f64 = -10.0;

async fn action_done(tb: &Testbed, n: usize) -> anyhow::Result<ocs_controller::JournalEntry> {
    ensure!(tb.ctl.journal().wait_len(n, SLOW).await, "action {n} never finished");
    let e = tb.ctl.journal().entries()[n - 1].clone();
    ensure!(e.ok(), "action {} ended with {}", e.act_id, e.outcome);
    Ok(e)
}

/// Signal detection on A's ingress triggers creation of a path along each
/// route in turn; time runs from the laser turning on until Z sees light.
pub async fn fig11a(runs: usize, seed: u64) -> anyhow::Result<Vec<DetectionSample>> {
    let fleet = FleetConfig::new(topo::fig7()).with_latency(reference_latency()).with_seed(seed);
    let tb = Testbed::launch(fleet, quiet_controller()).await?;
    let port = tb.ctl.store().link("A-OCS1").ok_or_else(|| anyhow!("A-OCS1 missing"))?.dst_port.clone();
    tb.call(
        api::ADD_EVENT,
        json!({"event_id": "Event_A", "event_type": "SIGNAL_DETECTION", "ocs": "OCS1", "port": port, "threshold": DETECTION_HIGH_DBM}),
    )
    .await?;
    let (a, z) = (tb.fleet.terminal("A").unwrap(), tb.fleet.terminal("Z").unwrap());
    let mut out = Vec::new();
    let mut done = 0;
    for (name, hops) in ROUTES {
        for run in 0..runs {
            let (svc, act) = (format!("det-{name}-{run}"), format!("act-{name}-{run}"));
            tb.call(
                api::CREATE_ACTION,
                json!({"act_id": act, "svc_id": svc, "a": "A", "z": "Z", "ocs_list": hops}),
            )
            .await?;
            tb.call(api::CREATE_EVENT_HANDLER, json!({"event_id": "Event_A", "act_id": act}))
                .await?;
            let t0 = Instant::now();
            a.set_laser(Some(LAUNCH_DBM));
            let lit = wait_for(SLOW, || z.rx_power() >= LAUNCH_DBM - 1e-9).await;
            let secs = t0.elapsed().as_secs_f64();
            ensure!(lit.is_some(), "{svc}: Z never saw light");
            done += 1;
            let entry = action_done(&tb, done).await?;
            let p = tb.ctl.store().path(&svc).cloned().ok_or_else(|| anyhow!("{svc} missing"))?;
            ensure!(p.hops == hops, "{svc} took {:?}", p.hops);
            out.push(DetectionSample {
                route: name.into(),
                run,
                secs,
                z_rx_dbm: z.rx_power(),
                action_s: entry.elapsed_s,
            });
            tb.call(api::DELETE_ACTION, json!({"act_id": act, "svc_id": svc})).await?;
            a.set_laser(None);
            tb.client.delete_fiber_path(&svc).await?;
        }
    }
    tb.shutdown().await;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RestorationSample {
    pub case: usize,
    pub from: String,
    pub to: String,
    pub run: usize,
    pub secs: f64,
    pub action_s: f64,
    pub alarming_vendor: String,
    pub reconfigured_vendors: String,
}

/// (case, from route, to route, strand pulled, strand marked beforehand)
pub const RESTORATION_CASES: [(usize, &str, &str, &str, Option<&str>); 3] = [
    (1, "R1", "R2", "OCS1-OCS3", None),
    (2, "R2", "R3", "OCS2-OCS3", Some("OCS1-OCS3")),
    (3, "R3", "R1", "OCS4-OCS3", None),
];

/// A low-power alarm on OCS3 triggers restoration after the in-path strand
/// into OCS3 is pulled; time runs from the pull until Z sees light again.
pub async fn fig11b(runs: usize, seed: u64) -> anyhow::Result<Vec<RestorationSample>> {
    let fleet = FleetConfig::new(topo::fig7()).with_latency(reference_latency()).with_seed(seed);
    let tb = Testbed::launch(fleet, quiet_controller()).await?;
    let store = tb.ctl.store();
    let mut events = Vec::new();
    for from in ["OCS1", "OCS2", "OCS4"] {
        let link = format!("{from}-OCS3");
        let port = store.link(&link).ok_or_else(|| anyhow!("{link} missing"))?.dst_port.clone();
        let id = format!("deg-{from}");
        tb.call(
            api::ADD_EVENT,
            json!({"event_id": id, "event_type": "SIGNAL_DEGRADATION", "ocs": "OCS3", "port": port, "threshold": DEGRADATION_LOW_DBM}),
        )
        .await?;
        events.push(id);
    }
    let (a, z) = (tb.fleet.terminal("A").unwrap(), tb.fleet.terminal("Z").unwrap());
    let vendor = |id: &str| format!("{:?}", tb.fleet.device(id).map(|d| d.vendor()).unwrap());
    let mut out = Vec::new();
    let mut done = 0;
    for (case, from, to, pulled, premarked) in RESTORATION_CASES {
        let (src, dst) = (topo::route(from).unwrap(), topo::route(to).unwrap());
        for run in 0..runs {
            let (svc, act) = (format!("case{case}-{run}"), format!("restore-{case}-{run}"));
            if let Some(l) = premarked {
                tb.set_status(l, "link", "UNAVAILABLE").await?;
            }
            tb.client.create_fiber_path(&path(&svc, src)).await?;
            a.set_laser(Some(LAUNCH_DBM));
            ensure!(z.rx_power() >= LAUNCH_DBM - 1e-9, "{svc}: no light before the pull");
            tb.call(api::CREATE_ACTION, json!({"act_id": act, "svc_id": svc, "a": "A", "z": "Z"}))
                .await?;
            for ev in &events {
                tb.call(api::CREATE_EVENT_HANDLER, json!({"event_id": ev, "act_id": act}))
                    .await?;
            }

            let t0 = Instant::now();
            tb.fleet.fabric().pull(pulled);
            let lit = wait_for(SLOW, || z.rx_power() >= LAUNCH_DBM - 1e-9).await;
            let secs = t0.elapsed().as_secs_f64();
            ensure!(lit.is_some(), "{svc}: light never came back");
            done += 1;
            let entry = action_done(&tb, done).await?;
            let p = tb.ctl.store().path(&svc).cloned().ok_or_else(|| anyhow!("{svc} missing"))?;
            ensure!(p.hops == dst, "{svc} restored onto {:?}", p.hops);
            let changed: BTreeSet<&str> = src
                .iter()
                .chain(dst)
                .copied()
                .filter(|h| *h != "OCS3")
                .collect();
            out.push(RestorationSample {
                case,
                from: from.into(),
                to: to.into(),
                run,
                secs,
                action_s: entry.elapsed_s,
                alarming_vendor: vendor("OCS3"),
                reconfigured_vendors: changed.iter().map(|h| format!("{h}={}", vendor(h))).collect::<Vec<_>>().join(" "),
            });

            tb.call(api::DELETE_ACTION, json!({"act_id": act, "svc_id": svc})).await?;
            a.set_laser(None);
            tb.client.delete_fiber_path(&svc).await?;
            tb.fleet.fabric().plug(pulled);
            tb.set_status(pulled, "link", "AVAILABLE").await?;
            if let Some(l) = premarked {
                tb.set_status(l, "link", "AVAILABLE").await?;
            }
        }
    }
    tb.shutdown().await;
    Ok(out)
}

// ---- scale ----

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSample {
    pub n: usize,
    pub switches: usize,
    pub run: usize,
    pub op: &'static str,
    pub secs: f64,
}

pub async fn fig13(ns: &[usize], runs: usize, seed: u64) -> anyhow::Result<Vec<ScaleSample>> {
    let mut out = Vec::new();
    for &n in ns {
        let fleet = FleetConfig::new(topo::fig12(n)).with_latency(reference_latency()).with_seed(seed);
        let tb = Testbed::launch(fleet, quiet_controller()).await?;
        for run in 0..runs {
            let svc = format!("scale-{n}-{run}");
            let (r, secs) = timed(tb.client.create_fiber_path(&PathParams::new(&svc, "A", "Z"))).await;
            let p = r?;
            ensure!(p.hops.len() == n, "{svc} has {} hops", p.hops.len());
            out.push(ScaleSample {
                n,
                switches: topo::fig12_switches(n),
                run,
                op: "create",
                secs,
            });
            let (r, secs) = timed(tb.client.delete_fiber_path(&svc)).await;
            r?;
            out.push(ScaleSample {
                n,
                switches: topo::fig12_switches(n),
                run,
                op: "delete",
                secs,
            });
        }
        tb.shutdown().await;
    }
    Ok(out)
}

// ---- translator overhead ----

#[derive(Debug, Clone, Serialize)]
pub struct OverheadSample {
    pub vendor: String,
    pub connections: usize,
    pub latency_s: f64,
    pub direct_s: f64,
    pub unified_s: f64,
    pub delta_s: f64,
    pub delta_ratio: f64,
}

/// Time to apply `n` cross-connects talking the vendor protocol directly
/// versus through the unified interface and its translator.
pub async fn overhead(ns: &[usize], latency_s: f64, reps: usize) -> anyhow::Result<Vec<OverheadSample>> {
    let max = ns.iter().copied().max().unwrap_or(1);
    let mut b = TopologyBuilder::new();
    for v in ["VA", "VB", "VC"] {
        b = b.switch(v);
    }
    let mut doc = b.build();
    for sw in &mut doc.switches {
        sw.tx_ports = (1..=max).map(|i| format!("T{i}")).collect();
        sw.rx_ports = (1..=max).map(|i| format!("R{i}")).collect();
    }
    let fleet = Fleet::launch(FleetConfig::new(doc).with_latency(LatencyModel::fixed_secs(latency_s))).await?;
    let timeout = Duration::from_secs(10);
    let mut out = Vec::new();
    for sw in fleet.topology().switches.clone() {
        let dev = fleet.device(&sw.id).unwrap();
        let conv = converter_for(dev.vendor());
        let mut direct = VendorClient::connect(&dev.addr().to_string(), conv, None, timeout)
            .await
            .map_err(|e| anyhow!(e))?;
        let unified = SbiSession::new(&sw.id, format!("{}:{}", sw.host, sw.port), timeout);
        for &n in ns {
            let conns: Vec<InternalConnection> = (1..=n)
                .map(|i| InternalConnection::new(format!("c{i}"), format!("R{i}"), format!("T{i}")))
                .collect();
            let connect: Vec<VendorCommand> = conns.iter().cloned().map(VendorCommand::Connect).collect();
            let disconnect: Vec<VendorCommand> = conns.iter().map(|c| VendorCommand::Disconnect(c.name.clone())).collect();
            let (mut d_total, mut u_total) = (0.0, 0.0);
            for _ in 0..reps {
                let (r, s) = timed(direct.exchange(&connect, timeout)).await;
                r.map_err(|e| anyhow!(e))?;
                d_total += s;
                direct.exchange(&disconnect, timeout).await.map_err(|e| anyhow!(e))?;
                ensure!(dev.connections().is_empty(), "direct cleanup left connections");

                let edit = EditPayload {
                    create: conns.clone(),
                    ..Default::default()
                };
                let (r, s) = timed(unified.edit_config(edit)).await;
                r?;
                u_total += s;
                ensure!(dev.connections().len() == n, "unified edit did not apply");
                unified
                    .edit_config(EditPayload {
                        delete: conns.iter().map(|c| c.name.clone()).collect(),
                        ..Default::default()
                    })
                    .await?;
            }
            let (direct_s, unified_s) = (d_total / reps as f64, u_total / reps as f64);
            out.push(OverheadSample {
                vendor: format!("{:?}", dev.vendor()),
                connections: n,
                latency_s,
                direct_s,
                unified_s,
                delta_s: unified_s - direct_s,
                delta_ratio: (unified_s - direct_s) / unified_s,
            });
        }
        unified.close().await;
    }
    fleet.shutdown();
    Ok(out)
}

// ---- atomicity ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GlobalState {
    FullIntent,
    Prior,
    Other,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetOutcome {
    pub mask: u32,
    pub down: String,
    pub outcome: String,
    pub state: GlobalState,
}

type Connections = BTreeMap<String, BTreeSet<InternalConnection>>;

fn connections(fleet: &Fleet) -> Connections {
    fleet
        .connection_state()
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Creates a path along the five-hop route once for every subset of its
/// switches being unreachable, and classifies the resulting device state.
pub async fn atomicity(modes: &[FaultMode]) -> anyhow::Result<Vec<SubsetOutcome>> {
    let cfg = ControllerConfig {
        sbi_timeout: Duration::from_millis(300),
        command_deadline: Duration::from_millis(300),
        ..quiet_controller()
    };
    let tb = Testbed::launch(FleetConfig::new(topo::fig7()), cfg).await?;
    let mut out = Vec::new();
    for &mode in modes {
        for mask in 0u32..(1 << R3.len()) {
            let down: Vec<&str> = R3.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, h)| *h).collect();
            let prior = connections(&tb.fleet);
            for d in &down {
                tb.fleet.set_fault(d, mode).await?;
            }
            let svc = format!("atom-{mask}");
            let res = tb.client.create_fiber_path(&path(&svc, R3)).await;
            tb.fleet.clear_faults().await?;
            let after = connections(&tb.fleet);
            let (state, outcome) = match &res {
                Ok(p) => {
                    let mut intent = prior.clone();
                    for (ocs, c) in p.connections() {
                        intent.entry(ocs.to_string()).or_default().insert(c.clone());
                    }
                    let s = if after == intent { GlobalState::FullIntent } else { GlobalState::Other };
                    (s, "OK".to_string())
                }
                Err(e) => {
                    let s = if after == prior { GlobalState::Prior } else { GlobalState::Other };
                    (s, e.code().map_or_else(|| e.to_string(), |c| c.as_str().to_string()))
                }
            };
            out.push(SubsetOutcome {
                mask,
                down: down.join(" "),
                outcome,
                state,
            });
            if res.is_ok() {
                tb.client.delete_fiber_path(&svc).await?;
            }
            // clear whatever the controller quarantined
            for h in R3 {
                tb.set_status(h, "ocs", "AVAILABLE").await?;
            }
            // remove leftovers a lying switch may have kept, so runs stay independent
            for (ocs, conns) in connections(&tb.fleet) {
                let dev = tb.fleet.device(&ocs).unwrap();
                for c in conns {
                    dev.force_disconnect(&c.name).map_err(|e| anyhow!(e))?;
                }
            }
        }
    }
    tb.shutdown().await;
    Ok(out)
}

// ---- crash recovery ----

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryOutcome {
    pub policy: String,
    pub scenario: String,
    pub verdict: Option<PathVerdict>,
    pub expected: Option<PathVerdict>,
    pub orphans_removed: usize,
    pub expected_orphans_removed: usize,
    pub orphans_left: usize,
    pub agreement: bool,
}

impl RecoveryOutcome {
    pub fn passed(&self) -> bool {
        self.agreement
            && self.orphans_left == 0
            && self.verdict == self.expected
            && self.orphans_removed == self.expected_orphans_removed
    }
}

/// Whether every available path is fully present on the devices, and how
/// many device connections belong to no path at all.
fn agreement(ctl: &Controller, fleet: &Fleet) -> (bool, usize) {
    let store = ctl.store();
    let (mut intent, mut owned): (Connections, Connections) = Default::default();
    for p in store.paths() {
        for (ocs, c) in p.connections() {
            // quarantined paths keep whatever is left of them on the devices
            owned.entry(ocs.to_string()).or_default().insert(c.clone());
            if p.status.is_available() {
                intent.entry(ocs.to_string()).or_default().insert(c.clone());
            }
        }
    }
    let devices = connections(fleet);
    let stray = devices
        .iter()
        .map(|(ocs, cs)| cs.iter().filter(|c| !owned.get(ocs).is_some_and(|i| i.contains(c))).count())
        .sum();
    let present = intent
        .iter()
        .all(|(ocs, cs)| devices.get(ocs).is_some_and(|d| cs.is_subset(d)));
    (present, stray)
}

/// Kills path creation at `kill`, restarts a controller on the same state
/// directory under `policy` and checks what reconciliation made of it.
pub async fn crash_recovery(dir: &Path, policy: ReconcilePolicy, kill: KillPoint) -> anyhow::Result<RecoveryOutcome> {
    let persistent = |p| ControllerConfig::in_dir(dir).without_health_checks().with_policy(p);
    let tb = Testbed::launch(FleetConfig::new(topo::fig7()), persistent(policy)).await?;
    tb.ctl.set_kill_point(Some(kill));
    if tb.client.create_fiber_path(&path("svc1", topo::R1)).await.is_ok() {
        bail!("create survived kill point {kill:?}");
    }
    let fleet = tb.detach().await;
    let ctl = Controller::start(persistent(policy)).await?;
    let report = ctl.reconcile_report();
    let (agree, left) = agreement(&ctl, &fleet);
    let expected = match kill {
        KillPoint::AfterPersist => Some(PathVerdict::Consistent),
        _ => None,
    };
    // two directions per hop configured but never recorded
    let expected_orphans_removed = match kill {
        KillPoint::BetweenConfigAndPersist => 2 * topo::R1.len(),
        _ => 0,
    };
    let out = RecoveryOutcome {
        policy: policy.to_string(),
        scenario: format!("{kill:?}"),
        verdict: report.verdict("svc1"),
        expected,
        orphans_removed: report.orphans.iter().filter(|o| o.removed).count(),
        expected_orphans_removed,
        orphans_left: left,
        agreement: agree,
    };
    ctl.shutdown().await;
    fleet.shutdown();
    Ok(out)
}

/// A cross-connect of a persisted path disappears while the controller is
/// down; the restarted controller repairs or quarantines it per policy.
pub async fn drift_recovery(dir: &Path, policy: ReconcilePolicy) -> anyhow::Result<RecoveryOutcome> {
    let persistent = || ControllerConfig::in_dir(dir).without_health_checks().with_policy(policy);
    let tb = Testbed::launch(FleetConfig::new(topo::fig7()), persistent()).await?;
    tb.client.create_fiber_path(&path("svc1", topo::R2)).await?;
    let fleet = tb.detach().await;
    fleet
        .device("OCS2")
        .unwrap()
        .force_disconnect(&ocs_model::forward_name("svc1"))
        .map_err(|e| anyhow!(e))?;
    let ctl = Controller::start(persistent()).await?;
    let report = ctl.reconcile_report();
    let (agree, left) = agreement(&ctl, &fleet);
    let expected = match policy {
        ReconcilePolicy::Reconfigure => PathVerdict::Repaired,
        ReconcilePolicy::MarkUnavailable => PathVerdict::Quarantined,
    };
    let out = RecoveryOutcome {
        policy: policy.to_string(),
        scenario: "drift".into(),
        verdict: report.verdict("svc1"),
        expected: Some(expected),
        orphans_removed: report.orphans.iter().filter(|o| o.removed).count(),
        expected_orphans_removed: 0,
        orphans_left: left,
        agreement: agree,
    };
    ctl.shutdown().await;
    fleet.shutdown();
    Ok(out)
}

// ---- event concurrency ----

#[derive(Debug, Clone, Serialize)]
pub struct StormOutcome {
    pub events: usize,
    pub actions_ok: usize,
    pub actions_failed: usize,
    pub received: u64,
    pub dispatched: u64,
    pub coalesced: u64,
    pub double_booked_ports: usize,
    pub dark_terminals: usize,
    pub elapsed_s: f64,
}

/// Fires `count` signal-detection events at once, each bound to its own
/// path creation.
pub async fn event_storm(count: usize, seed: u64) -> anyhow::Result<StormOutcome> {
    let fleet = FleetConfig::new(topo::fat(count, 4)).with_latency(reference_latency()).with_seed(seed);
    let tb = Testbed::launch(fleet, quiet_controller()).await?;
    let store = tb.ctl.store();
    for i in 0..count {
        let (a, z) = (topo::fat_a(i), topo::fat_z(i));
        let port = store.link(&format!("{a}-IN")).unwrap().dst_port.clone();
        tb.call(
            api::ADD_EVENT,
            json!({"event_id": format!("ev{i}"), "event_type": "SIGNAL_DETECTION", "ocs": "IN", "port": port, "threshold": DETECTION_HIGH_DBM}),
        )
        .await?;
        tb.call(api::CREATE_ACTION, json!({"act_id": format!("act{i}"), "svc_id": format!("svc{i}"), "a": a, "z": z}))
            .await?;
        tb.call(api::CREATE_EVENT_HANDLER, json!({"event_id": format!("ev{i}"), "act_id": format!("act{i}")}))
            .await?;
    }
    let t0 = Instant::now();
    for i in 0..count {
        tb.fleet.terminal(&topo::fat_a(i)).unwrap().set_laser(Some(0.0));
    }
    let finished = tb.ctl.journal().wait_len(count, Duration::from_secs(120)).await;
    let elapsed_s = t0.elapsed().as_secs_f64();
    ensure!(finished, "only {} of {count} actions finished", tb.ctl.journal().len());

    let entries = tb.ctl.journal().entries();
    let actions_ok = entries.iter().filter(|e| e.ok()).count();
    let mut double_booked_ports = 0;
    for conns in tb.fleet.connection_state().values() {
        let mut rx = BTreeSet::new();
        let mut tx = BTreeSet::new();
        for c in conns {
            double_booked_ports += usize::from(!rx.insert(&c.rx)) + usize::from(!tx.insert(&c.tx));
        }
    }
    if tb.ctl.store().audit().is_err() {
        double_booked_ports += 1;
    }
    let dark_terminals = (0..count)
        .filter(|i| tb.fleet.terminal(&topo::fat_z(*i)).unwrap().rx_power() < DETECTION_HIGH_DBM)
        .count();
    let c = tb.ctl.dispatch_counts();
    let out = StormOutcome {
        events: count,
        actions_ok,
        actions_failed: entries.len() - actions_ok,
        received: c.received,
        dispatched: c.dispatched,
        coalesced: c.coalesced,
        double_booked_ports,
        dark_terminals,
        elapsed_s,
    };
    tb.shutdown().await;
    Ok(out)
}
