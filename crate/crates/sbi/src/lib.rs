//! Southbound side of the controller: the unified device protocol, the
//! controller's client sessions, and per-vendor translators.

pub mod client;
pub mod server;
pub mod translator;
pub mod unified;
pub mod vendor;

pub use client::{EventSink, SbiError, SbiSession, SessionEvent, DEFAULT_RPC_TIMEOUT};
pub use server::{serve, ServerHandle, UnifiedDevice};
pub use translator::{converter_for, run_translator, Converter, Translator, VendorClient};
pub use unified::*;
pub use vendor::{Dialect, Level, Vendor, VendorCommand, VendorEvent, VendorReply};
