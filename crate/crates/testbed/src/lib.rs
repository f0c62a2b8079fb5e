//! Emulated testbeds for the OCS controller and the experiments run on them.

pub mod bench;
pub mod rig;
pub mod topo;

pub use rig::{reference_latency, quiet_controller, wait_for, Testbed};
