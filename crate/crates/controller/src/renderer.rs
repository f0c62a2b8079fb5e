//! Atomic, concurrent device configuration.
//!
//! Each switch's share of an operation is a command with an exact inverse.
//! All commands run at once; each one reads the device state back right after
//! its acknowledgement. If any command fails, the renderer waits for the
//! others to settle and then reverts every one that succeeded, concurrently.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ocs_model::{ConfigPayload, InternalConnection};
use ocs_sbi::{EditPayload, SbiSession};
use serde::Serialize;
use tokio::task::JoinSet;
use tracing::{info, warn};

pub const DEFAULT_COMMAND_DEADLINE: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Pending,
    Succeeded,
    Failed,
    Reverted,
}

#[derive(Debug, Clone, Serialize)]
pub struct OcsCommand {
    pub ocs_id: String,
    pub forward: ConfigPayload,
    pub revert: ConfigPayload,
    pub outcome: Outcome,
    pub error: Option<String>,
    #[serde(skip)]
    creates: Vec<InternalConnection>,
    #[serde(skip)]
    deletes: Vec<InternalConnection>,
}

impl OcsCommand {
    pub fn new(ocs_id: impl Into<String>, create: Vec<InternalConnection>, delete: Vec<InternalConnection>) -> Self {
        let ocs_id = ocs_id.into();
        let names = |v: &[InternalConnection]| v.iter().map(|c| c.name.clone()).collect();
        OcsCommand {
            forward: ConfigPayload {
                ocs_id: ocs_id.clone(),
                connections_to_create: create.clone(),
                connections_to_delete: names(&delete),
            },
            revert: ConfigPayload {
                ocs_id: ocs_id.clone(),
                connections_to_create: delete.clone(),
                connections_to_delete: names(&create),
            },
            ocs_id,
            outcome: Outcome::Pending,
            error: None,
            creates: create,
            deletes: delete,
        }
    }

    pub fn create(ocs_id: impl Into<String>, conns: Vec<InternalConnection>) -> Self {
        Self::new(ocs_id, conns, Vec::new())
    }

    pub fn delete(ocs_id: impl Into<String>, conns: Vec<InternalConnection>) -> Self {
        Self::new(ocs_id, Vec::new(), conns)
    }
}

#[derive(Debug, Clone)]
pub struct AtomicCommand {
    pub commands: Vec<OcsCommand>,
    pub deadline: Duration,
}

impl AtomicCommand {
    pub fn new(commands: Vec<OcsCommand>) -> Self {
        AtomicCommand {
            commands,
            deadline: DEFAULT_COMMAND_DEADLINE,
        }
    }

    pub fn with_deadline(mut self, d: Duration) -> Self {
        self.deadline = d;
        self
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExecutionReport {
    pub commands: Vec<OcsCommand>,
    /// From fan-out to the last command settling.
    pub forward_s: f64,
    /// From the start of the revert phase to the last revert settling.
    pub rollback_s: Option<f64>,
    /// From fan-out to the first observed failure.
    pub first_failure_s: Option<f64>,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("configuration failed on {failed:?} (revert failed on {revert_failed:?})")]
pub struct RenderFailure {
    pub failed: Vec<String>,
    pub revert_failed: Vec<String>,
    pub report: ExecutionReport,
}

impl RenderFailure {
    /// Every switch that should be taken out of service.
    pub fn suspects(&self) -> BTreeSet<String> {
        self.failed.iter().chain(&self.revert_failed).cloned().collect()
    }
}

pub trait SessionSource: Send + Sync {
    fn session(&self, ocs_id: &str) -> Option<Arc<SbiSession>>;
}

impl SessionSource for crate::registry::DeviceRegistry {
    fn session(&self, ocs_id: &str) -> Option<Arc<SbiSession>> {
        self.get(ocs_id)
    }
}

#[derive(Clone)]
pub struct Renderer {
    sessions: Arc<dyn SessionSource>,
}

/// Applies one payload and verifies it against the device's operational state.
async fn apply_checked(
    session: Option<Arc<SbiSession>>,
    ocs: String,
    payload: EditPayload,
    present: Vec<InternalConnection>,
    absent: Vec<String>,
    deadline: Duration,
) -> Result<(), String> {
    let s = session.ok_or_else(|| format!("no session to {ocs}"))?;
    let work = async {
        s.edit_config(payload).await.map_err(|e| e.to_string())?;
        let state = s.get_state().await.map_err(|e| e.to_string())?;
        if let Some(c) = present.iter().find(|c| !state.connections.contains(c)) {
            return Err(format!("sanity check: {} missing on {ocs}", c.name));
        }
        if let Some(n) = absent.iter().find(|n| state.connections.iter().any(|c| &c.name == *n)) {
            return Err(format!("sanity check: {n} still present on {ocs}"));
        }
        Ok(())
    };
    match tokio::time::timeout(deadline, work).await {
        Ok(r) => r,
        Err(_) => Err(format!("timed out after {deadline:?}")),
    }
}

impl Renderer {
    pub fn new(sessions: Arc<dyn SessionSource>) -> Self {
        Renderer { sessions }
    }

    pub async fn execute_atomic(&self, mut cmd: AtomicCommand) -> Result<ExecutionReport, RenderFailure> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = cmd.commands.iter().find(|c| !seen.insert(c.ocs_id.clone())) {
            let report = ExecutionReport {
                commands: cmd.commands.clone(),
                ..Default::default()
            };
            return Err(RenderFailure {
                failed: vec![dup.ocs_id.clone()],
                revert_failed: Vec::new(),
                report,
            });
        }
        let t0 = Instant::now();
        let mut first_failure: Option<Duration> = None;

        let mut set = JoinSet::new();
        for (i, c) in cmd.commands.iter().enumerate() {
            let fut = apply_checked(
                self.sessions.session(&c.ocs_id),
                c.ocs_id.clone(),
                EditPayload::from(&c.forward),
                c.creates.clone(),
                c.deletes.iter().map(|d| d.name.clone()).collect(),
                cmd.deadline,
            );
            set.spawn(async move { (i, fut.await) });
        }
        while let Some(joined) = set.join_next().await {
            let (i, res) = joined.expect("command task panicked");
            let c = &mut cmd.commands[i];
            match res {
                Ok(()) => c.outcome = Outcome::Succeeded,
                Err(e) => {
                    first_failure.get_or_insert_with(|| t0.elapsed());
                    warn!(ocs = %c.ocs_id, "command failed: {e}");
                    c.outcome = Outcome::Failed;
                    c.error = Some(e);
                }
            }
        }
        let forward = t0.elapsed();
        let failed: Vec<String> = cmd
            .commands
            .iter()
            .filter(|c| c.outcome == Outcome::Failed)
            .map(|c| c.ocs_id.clone())
            .collect();
        if failed.is_empty() {
            return Ok(ExecutionReport {
                commands: cmd.commands,
                forward_s: forward.as_secs_f64(),
                rollback_s: None,
                first_failure_s: None,
            });
        }

        let r0 = Instant::now();
        let mut set = JoinSet::new();
        for (i, c) in cmd.commands.iter().enumerate() {
            if c.outcome != Outcome::Succeeded {
                continue;
            }
            let fut = apply_checked(
                self.sessions.session(&c.ocs_id),
                c.ocs_id.clone(),
                EditPayload::from(&c.revert),
                c.deletes.clone(),
                c.creates.iter().map(|d| d.name.clone()).collect(),
                cmd.deadline,
            );
            set.spawn(async move { (i, fut.await) });
        }
        let mut revert_failed = Vec::new();
        while let Some(joined) = set.join_next().await {
            let (i, res) = joined.expect("revert task panicked");
            let c = &mut cmd.commands[i];
            match res {
                Ok(()) => c.outcome = Outcome::Reverted,
                Err(e) => {
                    warn!(ocs = %c.ocs_id, "revert failed: {e}");
                    c.error = Some(format!("revert: {e}"));
                    revert_failed.push(c.ocs_id.clone());
                }
            }
        }
        let rollback = r0.elapsed();
        info!(?failed, ?revert_failed, rollback_s = rollback.as_secs_f64(), "rolled back");
        Err(RenderFailure {
            failed,
            revert_failed,
            report: ExecutionReport {
                commands: cmd.commands,
                forward_s: forward.as_secs_f64(),
                rollback_s: Some(rollback.as_secs_f64()),
                first_failure_s: first_failure.map(|d| d.as_secs_f64()),
            },
        })
    }
}
