//! Startup reconciliation of persisted path intent against the devices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ocs_model::{FiberPath, InternalConnection, ObjectType, ResourceStatus};
use ocs_sbi::EditPayload;
use serde::{Deserialize, Serialize};
use tokio::task::JoinSet;
use tracing::{info, warn};

use crate::core::Controller;
use crate::wal::{RecordKind, RecordOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReconcilePolicy {
    Reconfigure,
    #[default]
    MarkUnavailable,
}

impl FromStr for ReconcilePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "reconfigure" => Ok(ReconcilePolicy::Reconfigure),
            "mark-unavailable" => Ok(ReconcilePolicy::MarkUnavailable),
            _ => Err(format!("unknown policy {s:?}")),
        }
    }
}

impl fmt::Display for ReconcilePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconcilePolicy::Reconfigure => "reconfigure",
            ReconcilePolicy::MarkUnavailable => "mark-unavailable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathVerdict {
    Consistent,
    Repaired,
    Quarantined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub svc_id: String,
    pub verdict: PathVerdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detail: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orphan {
    pub ocs: String,
    pub connection: InternalConnection,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileReport {
    pub policy: ReconcilePolicy,
    pub paths: Vec<PathReport>,
    pub orphans: Vec<Orphan>,
    pub unreachable: Vec<String>,
    pub elapsed_s: f64,
}

impl ReconcileReport {
    pub fn empty(policy: ReconcilePolicy) -> Self {
        ReconcileReport {
            policy,
            paths: Vec::new(),
            orphans: Vec::new(),
            unreachable: Vec::new(),
            elapsed_s: 0.0,
        }
    }

    pub fn verdict(&self, svc: &str) -> Option<PathVerdict> {
        self.paths.iter().find(|p| p.svc_id == svc).map(|p| p.verdict)
    }
}

impl Controller {
    fn mark_switch(&self, ocs: &str) {
        if let Err(e) = self.set_status(ocs, ObjectType::Switch, ResourceStatus::Unavailable) {
            warn!(%ocs, "cannot mark switch: {e}");
        }
    }

    fn mark_path(&self, svc: &str) {
        let res = self.commit(|st| {
            let mut p = st.store.release_path(svc)?;
            p.status = ResourceStatus::Unavailable;
            st.store.restore_path(p.clone())?;
            Ok(((), vec![(RecordKind::Path, RecordOp::Put, serde_json::to_value(&p).unwrap())]))
        });
        if let Err(e) = res {
            warn!(%svc, "cannot mark path: {e}");
        }
    }

    async fn read_all(&self, ids: &[String]) -> BTreeMap<String, Result<Vec<InternalConnection>, String>> {
        let mut set = JoinSet::new();
        for id in ids {
            let s = self.registry.get(id);
            let id = id.clone();
            set.spawn(async move {
                let r = match s {
                    Some(s) => s.get_state().await.map(|st| st.connections).map_err(|e| e.to_string()),
                    None => Err("no session".to_string()),
                };
                (id, r)
            });
        }
        set.join_all().await.into_iter().collect()
    }

    /// Compares every persisted path with the switches' operational state,
    /// removes connections no path accounts for and applies the configured
    /// policy to mismatches.
    pub async fn reconcile(&self) -> ReconcileReport {
        let t0 = Instant::now();
        let policy = self.cfg.policy;
        let (paths, switches): (Vec<FiberPath>, Vec<String>) = {
            let st = self.state.lock().unwrap();
            (
                st.store.paths().cloned().collect(),
                st.store.nodes().map(|n| n.id.clone()).collect(),
            )
        };
        let mut intent: BTreeMap<&str, BTreeSet<&InternalConnection>> = BTreeMap::new();
        for p in &paths {
            for (ocs, c) in p.connections() {
                intent.entry(ocs).or_default().insert(c);
            }
        }
        let mut states = self.read_all(&switches).await;
        let mut report = ReconcileReport::empty(policy);

        for (ocs, state) in states.iter_mut() {
            let Ok(conns) = state else {
                report.unreachable.push(ocs.clone());
                continue;
            };
            let expected = intent.get(ocs.as_str());
            let stray: Vec<InternalConnection> = conns
                .iter()
                .filter(|c| !expected.is_some_and(|e| e.contains(c)))
                .cloned()
                .collect();
            if stray.is_empty() {
                continue;
            }
            let payload = EditPayload {
                delete: stray.iter().map(|c| c.name.clone()).collect(),
                ..Default::default()
            };
            let removed = match self.registry.get(ocs) {
                Some(s) => s.edit_config(payload).await.is_ok(),
                None => false,
            };
            if removed {
                conns.retain(|c| !stray.contains(c));
            } else {
                warn!(%ocs, "could not remove orphan connections");
            }
            for c in stray {
                report.orphans.push(Orphan {
                    ocs: ocs.clone(),
                    connection: c,
                    removed,
                });
            }
        }
        for ocs in &report.unreachable {
            self.mark_switch(ocs);
        }

        for p in &paths {
            let mut detail = Vec::new();
            let mut down = Vec::new();
            let mut missing: BTreeMap<String, Vec<InternalConnection>> = BTreeMap::new();
            for hop in &p.hops {
                match &states[hop] {
                    Err(e) => {
                        detail.push(format!("{hop} unreachable: {e}"));
                        down.push(hop.clone());
                    }
                    Ok(conns) => {
                        for c in p.per_ocs_configs.get(hop).into_iter().flatten() {
                            if !conns.contains(c) {
                                detail.push(format!("{} missing on {hop}", c.name));
                                missing.entry(hop.clone()).or_default().push(c.clone());
                            }
                        }
                    }
                }
            }
            let verdict = if !down.is_empty() {
                PathVerdict::Quarantined
            } else if missing.is_empty() {
                PathVerdict::Consistent
            } else if policy == ReconcilePolicy::Reconfigure {
                let mut failed = Vec::new();
                for (hop, conns) in &missing {
                    let Some(s) = self.registry.get(hop) else {
                        failed.push(hop.clone());
                        continue;
                    };
                    let ok = s
                        .edit_config(EditPayload {
                            create: conns.clone(),
                            ..Default::default()
                        })
                        .await
                        .is_ok()
                        && s.get_state()
                            .await
                            .is_ok_and(|st| conns.iter().all(|c| st.connections.contains(c)));
                    if !ok {
                        failed.push(hop.clone());
                    }
                }
                if failed.is_empty() {
                    PathVerdict::Repaired
                } else {
                    detail.push(format!("repair failed on {failed:?}"));
                    for hop in &failed {
                        self.mark_switch(hop);
                    }
                    PathVerdict::Quarantined
                }
            } else {
                for hop in missing.keys() {
                    self.mark_switch(hop);
                }
                PathVerdict::Quarantined
            };
            if verdict == PathVerdict::Quarantined {
                self.mark_path(&p.svc_id);
            }
            report.paths.push(PathReport {
                svc_id: p.svc_id.clone(),
                verdict,
                detail,
            });
        }
        report.elapsed_s = t0.elapsed().as_secs_f64();
        info!(
            report = %serde_json::to_string(&report).unwrap_or_default(),
            "reconciliation finished"
        );
        report
    }
}
