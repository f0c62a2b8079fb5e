//! Emulated optical circuit switches for testing the controller without
//! hardware.
//!
//! Each [`OcsEmulator`] speaks one vendor protocol, actuates cross-connects
//! after a sampled latency and can be told to misbehave. A [`Fleet`] wires
//! emulators, translators and [`TerminalEmulator`]s together over a
//! [`Fabric`] so that light actually flows along established paths.

pub mod alarm;
pub mod device;
pub mod fabric;
pub mod fleet;
pub mod profile;
pub mod terminal;

pub use alarm::{Thresholds, DARK_DBM};
pub use device::{start_emulator, DeviceSnapshot, OcsEmulator, RequestCounts};
pub use fabric::Fabric;
pub use fleet::{Fleet, FleetConfig};
pub use profile::{EmulatorProfile, FaultMode, LatencyModel};
pub use terminal::{TerminalEmulator, RX_PORT, TX_PORT};
