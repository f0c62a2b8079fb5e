//! Fiber-layer domain types: switches, terminals, fiber strands and the
//! provisioned paths that run over them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::NbiError;

/// Lowest and highest optical power accepted for thresholds, in dBm.
pub const MIN_DBM: f64 = -99.0;
pub const MAX_DBM: f64 = 30.0;

pub fn check_threshold(dbm: f64) -> Result<(), NbiError> {
    if dbm.is_finite() && (MIN_DBM..=MAX_DBM).contains(&dbm) {
        Ok(())
    } else {
        Err(NbiError::invalid_range(format!(
            "threshold {dbm} dBm outside {MIN_DBM}..{MAX_DBM}"
        )))
    }
}

/// Management endpoint of a device.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConnInfo {
    pub host: String,
    pub port: u16,
}

impl ConnInfo {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        ConnInfo {
            host: host.into(),
            port,
        }
    }

    pub fn validate(&self) -> Result<(), NbiError> {
        if self.host.trim().is_empty() {
            return Err(NbiError::invalid_range("conn_info host is empty"));
        }
        if self.port == 0 {
            return Err(NbiError::invalid_range("conn_info port must be 1..65535"));
        }
        Ok(())
    }

    pub fn addr(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

impl fmt::Display for ConnInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.host, self.port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResourceStatus {
    #[default]
    Available,
    Unavailable,
}

impl ResourceStatus {
    pub fn is_available(self) -> bool {
        self == ResourceStatus::Available
    }
}

impl FromStr for ResourceStatus {
    type Err = NbiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "available" => Ok(ResourceStatus::Available),
            "unavailable" => Ok(ResourceStatus::Unavailable),
            other => Err(NbiError::invalid_range(format!("unknown status {other:?}"))),
        }
    }
}

impl fmt::Display for ResourceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceStatus::Available => f.write_str("AVAILABLE"),
            ResourceStatus::Unavailable => f.write_str("UNAVAILABLE"),
        }
    }
}

/// Kind of object addressed by a status update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectType {
    Switch,
    Terminal,
    Link,
    /// Addressed as `<ocs_id>/<port>`.
    Port,
}

impl FromStr for ObjectType {
    type Err = NbiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "switch" | "ocs" => Ok(ObjectType::Switch),
            "terminal" => Ok(ObjectType::Terminal),
            "link" => Ok(ObjectType::Link),
            "port" => Ok(ObjectType::Port),
            other => Err(NbiError::invalid_range(format!(
                "unknown object type {other:?}"
            ))),
        }
    }
}

/// Splits a port object id of the form `<ocs_id>/<port>`.
pub fn split_port_id(object_id: &str) -> Option<(&str, &str)> {
    let (ocs, port) = object_id.split_once('/')?;
    if ocs.is_empty() || port.is_empty() {
        None
    } else {
        Some((ocs, port))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcsNode {
    pub id: String,
    pub conn: ConnInfo,
    pub tx_ports: BTreeSet<String>,
    pub rx_ports: BTreeSet<String>,
    #[serde(default)]
    pub status: ResourceStatus,
}

impl OcsNode {
    pub fn new<I, J, S, T>(id: impl Into<String>, conn: ConnInfo, tx: I, rx: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        OcsNode {
            id: id.into(),
            conn,
            tx_ports: tx.into_iter().map(Into::into).collect(),
            rx_ports: rx.into_iter().map(Into::into).collect(),
            status: ResourceStatus::Available,
        }
    }

    pub fn validate(&self) -> Result<(), NbiError> {
        if self.id.is_empty() {
            return Err(NbiError::invalid_range("switch id is empty"));
        }
        self.conn.validate()?;
        if self.tx_ports.is_empty() || self.rx_ports.is_empty() {
            return Err(NbiError::invalid_range(format!(
                "switch {} needs at least one tx and one rx port",
                self.id
            )));
        }
        if let Some(p) = self.tx_ports.intersection(&self.rx_ports).next() {
            return Err(NbiError::invalid_range(format!(
                "port {p} on {} listed as both tx and rx",
                self.id
            )));
        }
        if self
            .tx_ports
            .iter()
            .chain(&self.rx_ports)
            .any(|p| p.is_empty() || p.contains(char::is_whitespace))
        {
            return Err(NbiError::invalid_range(format!(
                "switch {} has a malformed port label",
                self.id
            )));
        }
        Ok(())
    }

    pub fn has_port(&self, port: &str) -> bool {
        self.tx_ports.contains(port) || self.rx_ports.contains(port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub id: String,
    pub conn: ConnInfo,
    #[serde(default)]
    pub status: ResourceStatus,
}

impl Terminal {
    pub fn new(id: impl Into<String>, conn: ConnInfo) -> Self {
        Terminal {
            id: id.into(),
            conn,
            status: ResourceStatus::Available,
        }
    }
}

/// One unidirectional fiber strand, running from a Tx port to an Rx port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberLink {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub src_port: String,
    pub dst_port: String,
    #[serde(default)]
    pub status: ResourceStatus,
}

impl FiberLink {
    pub fn new(
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
        src_port: impl Into<String>,
        dst_port: impl Into<String>,
    ) -> Self {
        FiberLink {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            src_port: src_port.into(),
            dst_port: dst_port.into(),
            status: ResourceStatus::Available,
        }
    }
}

/// A unidirectional rx -> tx cross-connect inside one switch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InternalConnection {
    pub name: String,
    pub rx: String,
    pub tx: String,
}

impl InternalConnection {
    pub fn new(name: impl Into<String>, rx: impl Into<String>, tx: impl Into<String>) -> Self {
        InternalConnection {
            name: name.into(),
            rx: rx.into(),
            tx: tx.into(),
        }
    }
}

pub fn forward_name(svc_id: &str) -> String {
    format!("{svc_id}-fwd")
}

pub fn reverse_name(svc_id: &str) -> String {
    format!("{svc_id}-rev")
}

/// A provisioned duplex fiber path between two terminals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberPath {
    pub svc_id: String,
    pub a: String,
    pub z: String,
    pub hops: Vec<String>,
    pub per_ocs_configs: BTreeMap<String, Vec<InternalConnection>>,
    #[serde(default)]
    pub status: ResourceStatus,
}

impl FiberPath {
    pub fn connections(&self) -> impl Iterator<Item = (&str, &InternalConnection)> {
        self.per_ocs_configs
            .iter()
            .flat_map(|(ocs, conns)| conns.iter().map(move |c| (ocs.as_str(), c)))
    }

    /// Every (switch, port) the path occupies.
    pub fn ports(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (ocs, c) in self.connections() {
            out.insert((ocs.to_string(), c.rx.clone()));
            out.insert((ocs.to_string(), c.tx.clone()));
        }
        out
    }

    pub fn validate_shape(&self) -> Result<(), NbiError> {
        if self.hops.is_empty() {
            return Err(NbiError::invalid_range("path has no hops"));
        }
        let keys: BTreeSet<&String> = self.per_ocs_configs.keys().collect();
        let hops: BTreeSet<&String> = self.hops.iter().collect();
        if keys != hops || hops.len() != self.hops.len() {
            return Err(NbiError::invalid_range(
                "path configs do not match its hop list",
            ));
        }
        if self.per_ocs_configs.values().any(|c| c.len() != 2) {
            return Err(NbiError::invalid_range(
                "every hop must carry exactly a forward and a reverse connection",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert!(check_threshold(-1.0).is_ok());
        assert!(check_threshold(-99.0).is_ok());
        assert!(check_threshold(30.0).is_ok());
        assert!(check_threshold(30.5).is_err());
        assert!(check_threshold(f64::NAN).is_err());
    }

    #[test]
    fn node_rejects_shared_port_label() {
        let n = OcsNode::new("X", ConnInfo::new("h", 1), ["P1"], ["P1"]);
        assert!(n.validate().is_err());
        let n = OcsNode::new("X", ConnInfo::new("h", 1), Vec::<String>::new(), ["R1"]);
        assert!(n.validate().is_err());
        let n = OcsNode::new("X", ConnInfo::new("", 1), ["T1"], ["R1"]);
        assert!(n.validate().is_err());
    }

    #[test]
    fn status_parse() {
        assert_eq!(
            "unavailable".parse::<ResourceStatus>().unwrap(),
            ResourceStatus::Unavailable
        );
        assert_eq!(
            serde_json::to_string(&ResourceStatus::Available).unwrap(),
            "\"AVAILABLE\""
        );
        assert_eq!(split_port_id("OCS1/R1"), Some(("OCS1", "R1")));
        assert_eq!(split_port_id("OCS1"), None);
    }
}
