//! SDN controller for networks of optical circuit switches.
//!
//! The controller keeps a fiber-layer inventory, computes and configures
//! duplex fiber paths atomically across switches from different vendors,
//! reacts to optical power alarms, and recovers its state from a
//! write-ahead log after a restart.

pub mod api;
pub mod core;
pub mod dispatch;
pub mod events;
pub mod nbi;
pub mod reconcile;
pub mod registry;
pub mod renderer;
pub mod wal;

pub use crate::core::{Controller, ControllerConfig, KillPoint, JOURNAL_FILE, LOS_DBM, REPORT_FILE, WAL_FILE};
pub use api::PathParams;
pub use dispatch::DispatchCounts;
pub use events::{ActionSpec, EventSpec, EventType, HandlerBinding, Journal, JournalEntry};
pub use nbi::{serve, ClientError, NbiClient, NbiServer};
pub use reconcile::{Orphan, PathReport, PathVerdict, ReconcilePolicy, ReconcileReport};
pub use renderer::{AtomicCommand, ExecutionReport, OcsCommand, Outcome, RenderFailure, Renderer, SessionSource};
pub use wal::{DurableState, PersistentRecord, RecordKind, RecordOp, Wal};
