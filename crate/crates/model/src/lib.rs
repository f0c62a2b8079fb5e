//! Fiber-layer resource model for optical-circuit-switched networks:
//! inventory types, the transactional resource store, bulk topology
//! documents, and the fiber-path computation engine.

pub mod error;
pub mod fpce;
pub mod store;
pub mod topology;
pub mod types;

pub use error::{ErrorCode, NbiError};
pub use fpce::{ConfigPayload, Fpce, PathRequest, RoutePlan};
pub use store::ResourceStore;
pub use topology::{TopologyBuilder, TopologyDoc};
pub use types::*;
