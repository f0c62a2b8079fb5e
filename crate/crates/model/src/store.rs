//! In-memory resource inventory.
//!
//! The store is a plain value; callers that share it across threads wrap it
//! in a lock and treat every `&mut self` method as one transaction. Methods
//! that fail leave the store untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{NbiError, Result};
use crate::topology::TopologyDoc;
use crate::types::{
    split_port_id, FiberLink, FiberPath, ObjectType, OcsNode, ResourceStatus, Terminal,
};

type PortKey = (String, String);

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResourceStore {
    nodes: BTreeMap<String, OcsNode>,
    terminals: BTreeMap<String, Terminal>,
    links: BTreeMap<String, FiberLink>,
    unavailable_ports: BTreeSet<PortKey>,
    paths: BTreeMap<String, FiberPath>,

    #[serde(skip)]
    out_strand: BTreeMap<PortKey, String>,
    #[serde(skip)]
    in_strand: BTreeMap<PortKey, String>,
    #[serde(skip)]
    port_owner: BTreeMap<PortKey, String>,
    #[serde(skip)]
    link_owner: BTreeMap<String, String>,
}

impl ResourceStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn id_taken(&self, id: &str) -> bool {
        self.nodes.contains_key(id) || self.terminals.contains_key(id) || self.links.contains_key(id)
    }

    pub fn register_switch(&mut self, mut node: OcsNode) -> Result<()> {
        node.validate()?;
        if self.id_taken(&node.id) {
            return Err(NbiError::already_exist(format!("resource {}", node.id)));
        }
        node.status = ResourceStatus::Available;
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn register_terminal(&mut self, mut t: Terminal) -> Result<()> {
        if t.id.is_empty() {
            return Err(NbiError::invalid_range("terminal id is empty"));
        }
        t.conn.validate()?;
        if self.id_taken(&t.id) {
            return Err(NbiError::already_exist(format!("resource {}", t.id)));
        }
        t.status = ResourceStatus::Available;
        self.terminals.insert(t.id.clone(), t);
        Ok(())
    }

    pub fn register_link(&mut self, mut l: FiberLink) -> Result<()> {
        if l.id.is_empty() {
            return Err(NbiError::invalid_range("link id is empty"));
        }
        if self.id_taken(&l.id) {
            return Err(NbiError::already_exist(format!("resource {}", l.id)));
        }
        for end in [&l.src, &l.dst] {
            if !self.nodes.contains_key(end) && !self.terminals.contains_key(end) {
                return Err(NbiError::not_found(format!("resource {end}")));
            }
        }
        if l.src == l.dst {
            return Err(NbiError::invalid_range(format!(
                "link {} loops back onto {}",
                l.id, l.src
            )));
        }
        if l.src_port.is_empty() || l.dst_port.is_empty() {
            return Err(NbiError::invalid_range(format!("link {} has an empty port", l.id)));
        }
        if let Some(n) = self.nodes.get(&l.src) {
            if !n.tx_ports.contains(&l.src_port) {
                return Err(NbiError::invalid_range(format!(
                    "{} is not a tx port of {}",
                    l.src_port, l.src
                )));
            }
        }
        if let Some(n) = self.nodes.get(&l.dst) {
            if !n.rx_ports.contains(&l.dst_port) {
                return Err(NbiError::invalid_range(format!(
                    "{} is not an rx port of {}",
                    l.dst_port, l.dst
                )));
            }
        }
        let out_key = (l.src.clone(), l.src_port.clone());
        let in_key = (l.dst.clone(), l.dst_port.clone());
        if let Some(other) = self.out_strand.get(&out_key) {
            return Err(NbiError::already_exist(format!(
                "{}/{} is already the source of {other}",
                l.src, l.src_port
            )));
        }
        if let Some(other) = self.in_strand.get(&in_key) {
            return Err(NbiError::already_exist(format!(
                "{}/{} is already the destination of {other}",
                l.dst, l.dst_port
            )));
        }
        l.status = ResourceStatus::Available;
        self.out_strand.insert(out_key, l.id.clone());
        self.in_strand.insert(in_key, l.id.clone());
        self.links.insert(l.id.clone(), l);
        Ok(())
    }

    /// Registers every element of `doc`, or nothing at all.
    pub fn apply_network(&mut self, doc: &TopologyDoc) -> Result<()> {
        let mut staged = self.clone();
        for s in &doc.switches {
            staged.register_switch(s.to_node()?)?;
        }
        for t in &doc.terminals {
            staged.register_terminal(t.to_terminal()?)?;
        }
        for l in &doc.links {
            staged.register_link(l.to_link())?;
        }
        *self = staged;
        Ok(())
    }

    pub fn update_status(
        &mut self,
        object_id: &str,
        object_type: ObjectType,
        status: ResourceStatus,
    ) -> Result<()> {
        match object_type {
            ObjectType::Switch => {
                self.nodes
                    .get_mut(object_id)
                    .ok_or_else(|| NbiError::not_found(format!("switch {object_id}")))?
                    .status = status;
            }
            ObjectType::Terminal => {
                self.terminals
                    .get_mut(object_id)
                    .ok_or_else(|| NbiError::not_found(format!("terminal {object_id}")))?
                    .status = status;
            }
            ObjectType::Link => {
                self.links
                    .get_mut(object_id)
                    .ok_or_else(|| NbiError::not_found(format!("link {object_id}")))?
                    .status = status;
            }
            ObjectType::Port => {
                let (ocs, port) = split_port_id(object_id)
                    .ok_or_else(|| NbiError::not_found(format!("port {object_id}")))?;
                let node = self
                    .nodes
                    .get(ocs)
                    .ok_or_else(|| NbiError::not_found(format!("switch {ocs}")))?;
                if !node.has_port(port) {
                    return Err(NbiError::not_found(format!("port {object_id}")));
                }
                let key = (ocs.to_string(), port.to_string());
                match status {
                    ResourceStatus::Available => self.unavailable_ports.remove(&key),
                    ResourceStatus::Unavailable => self.unavailable_ports.insert(key),
                };
            }
        }
        Ok(())
    }

    /// Links a path's connections traverse, in no particular order.
    pub fn path_links(&self, path: &FiberPath) -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        for (ocs, c) in path.connections() {
            let into = self
                .in_strand
                .get(&(ocs.to_string(), c.rx.clone()))
                .ok_or_else(|| {
                    NbiError::invalid_range(format!("no strand feeds {ocs}/{}", c.rx))
                })?;
            let from = self
                .out_strand
                .get(&(ocs.to_string(), c.tx.clone()))
                .ok_or_else(|| {
                    NbiError::invalid_range(format!("no strand leaves {ocs}/{}", c.tx))
                })?;
            out.insert(into.clone());
            out.insert(from.clone());
        }
        Ok(out)
    }

    fn check_path_structure(&self, path: &FiberPath) -> Result<BTreeSet<String>> {
        path.validate_shape()?;
        if self.paths.contains_key(&path.svc_id) {
            return Err(NbiError::already_exist(format!("path {}", path.svc_id)));
        }
        for t in [&path.a, &path.z] {
            if !self.terminals.contains_key(t) {
                return Err(NbiError::not_found(format!("terminal {t}")));
            }
        }
        for (ocs, c) in path.connections() {
            let node = self
                .nodes
                .get(ocs)
                .ok_or_else(|| NbiError::not_found(format!("switch {ocs}")))?;
            if !node.rx_ports.contains(&c.rx) || !node.tx_ports.contains(&c.tx) {
                return Err(NbiError::invalid_range(format!(
                    "connection {} uses ports missing on {ocs}",
                    c.name
                )));
            }
        }
        self.path_links(path)
    }

    fn check_exclusive(&self, path: &FiberPath, links: &BTreeSet<String>) -> Result<()> {
        for key in path.ports() {
            if let Some(owner) = self.port_owner.get(&key) {
                return Err(NbiError::blocking(format!(
                    "{}/{} is occupied by {owner}",
                    key.0, key.1
                )));
            }
        }
        for l in links {
            if let Some(owner) = self.link_owner.get(l) {
                return Err(NbiError::blocking(format!("link {l} is occupied by {owner}")));
            }
        }
        Ok(())
    }

    /// Books every port and strand of `path` for it.
    pub fn allocate_path(&mut self, path: FiberPath) -> Result<()> {
        let links = self.check_path_structure(&path)?;
        self.check_exclusive(&path, &links)?;
        for t in [&path.a, &path.z] {
            if !self.terminals[t].status.is_available() {
                return Err(NbiError::blocking(format!("terminal {t} is unavailable")));
            }
        }
        for hop in &path.hops {
            if !self.nodes[hop].status.is_available() {
                return Err(NbiError::blocking(format!("switch {hop} is unavailable")));
            }
        }
        for key in path.ports() {
            if self.unavailable_ports.contains(&key) {
                return Err(NbiError::blocking(format!(
                    "port {}/{} is unavailable",
                    key.0, key.1
                )));
            }
        }
        for l in &links {
            if !self.links[l].status.is_available() {
                return Err(NbiError::blocking(format!("link {l} is unavailable")));
            }
        }
        self.book(path, links);
        Ok(())
    }

    /// Re-inserts a previously allocated path without availability checks;
    /// used when replaying persisted state.
    pub fn restore_path(&mut self, path: FiberPath) -> Result<()> {
        let links = self.check_path_structure(&path)?;
        self.check_exclusive(&path, &links)?;
        self.book(path, links);
        Ok(())
    }

    fn book(&mut self, path: FiberPath, links: BTreeSet<String>) {
        for key in path.ports() {
            self.port_owner.insert(key, path.svc_id.clone());
        }
        for l in links {
            self.link_owner.insert(l, path.svc_id.clone());
        }
        self.paths.insert(path.svc_id.clone(), path);
    }

    pub fn release_path(&mut self, svc_id: &str) -> Result<FiberPath> {
        let path = self
            .paths
            .remove(svc_id)
            .ok_or_else(|| NbiError::not_found(format!("path {svc_id}")))?;
        self.port_owner.retain(|_, owner| owner != svc_id);
        self.link_owner.retain(|_, owner| owner != svc_id);
        Ok(path)
    }

    /// Sets the status of the path and of every switch, port and strand on it.
    pub fn set_path_availability(&mut self, svc_id: &str, status: ResourceStatus) -> Result<()> {
        let path = self
            .paths
            .get(svc_id)
            .ok_or_else(|| NbiError::not_found(format!("path {svc_id}")))?
            .clone();
        let links = self.path_links(&path)?;
        for hop in &path.hops {
            self.update_status(hop, ObjectType::Switch, status)?;
        }
        for (ocs, port) in path.ports() {
            self.update_status(&format!("{ocs}/{port}"), ObjectType::Port, status)?;
        }
        for l in links {
            self.update_status(&l, ObjectType::Link, status)?;
        }
        self.paths.get_mut(svc_id).expect("checked above").status = status;
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&OcsNode> {
        self.nodes.get(id)
    }

    pub fn terminal(&self, id: &str) -> Option<&Terminal> {
        self.terminals.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&FiberLink> {
        self.links.get(id)
    }

    pub fn path(&self, svc_id: &str) -> Option<&FiberPath> {
        self.paths.get(svc_id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &OcsNode> {
        self.nodes.values()
    }

    pub fn terminals(&self) -> impl Iterator<Item = &Terminal> {
        self.terminals.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &FiberLink> {
        self.links.values()
    }

    pub fn paths(&self) -> impl Iterator<Item = &FiberPath> {
        self.paths.values()
    }

    pub fn unavailable_ports(&self) -> impl Iterator<Item = &(String, String)> {
        self.unavailable_ports.iter()
    }

    pub fn port_available(&self, device: &str, port: &str) -> bool {
        !self
            .unavailable_ports
            .contains(&(device.to_string(), port.to_string()))
    }

    /// The strand leaving `device/port`, if any.
    pub fn link_from(&self, device: &str, port: &str) -> Option<&FiberLink> {
        self.out_strand
            .get(&(device.to_string(), port.to_string()))
            .map(|id| &self.links[id])
    }

    /// The strand arriving at `device/port`, if any.
    pub fn link_into(&self, device: &str, port: &str) -> Option<&FiberLink> {
        self.in_strand
            .get(&(device.to_string(), port.to_string()))
            .map(|id| &self.links[id])
    }

    pub fn port_owner(&self, device: &str, port: &str) -> Option<&str> {
        self.port_owner
            .get(&(device.to_string(), port.to_string()))
            .map(String::as_str)
    }

    pub fn link_owner(&self, link_id: &str) -> Option<&str> {
        self.link_owner.get(link_id).map(String::as_str)
    }

    pub fn is_terminal(&self, id: &str) -> bool {
        self.terminals.contains_key(id)
    }

    pub fn is_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Canonically ordered JSON rendering, used to compare stores.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("store serializes")
    }

    /// Checks the store's structural invariants; returns the first violation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for l in self.links.values() {
            for end in [&l.src, &l.dst] {
                if !self.is_node(end) && !self.is_terminal(end) {
                    return Err(format!("link {} refers to unknown {end}", l.id));
                }
            }
        }
        let mut seen: BTreeMap<PortKey, &str> = BTreeMap::new();
        let mut seen_links: BTreeMap<String, &str> = BTreeMap::new();
        for p in self.paths.values() {
            for key in p.ports() {
                if let Some(prev) = seen.insert(key.clone(), &p.svc_id) {
                    return Err(format!(
                        "{}/{} booked by both {prev} and {}",
                        key.0, key.1, p.svc_id
                    ));
                }
            }
            for l in self.path_links(p).map_err(|e| e.to_string())? {
                if let Some(prev) = seen_links.insert(l.clone(), &p.svc_id) {
                    return Err(format!("link {l} booked by both {prev} and {}", p.svc_id));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ConnInfo, InternalConnection};
    use crate::error::ErrorCode;

    fn conn() -> ConnInfo {
        ConnInfo::new("127.0.0.1", 830)
    }

    fn two_switches() -> ResourceStore {
        let mut s = ResourceStore::new();
        s.register_switch(OcsNode::new("OCS1", conn(), ["T1", "T2"], ["R1", "R2"]))
            .unwrap();
        s.register_switch(OcsNode::new("OCS2", conn(), ["T1", "T2"], ["R1", "R2"]))
            .unwrap();
        s
    }

    #[test]
    fn duplicate_switch() {
        let mut s = two_switches();
        let err = s
            .register_switch(OcsNode::new("OCS1", conn(), ["T1"], ["R1"]))
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::AlreadyExist);
    }

    #[test]
    fn link_rules() {
        let mut s = two_switches();
        s.register_link(FiberLink::new("L1", "OCS1", "OCS2", "T1", "R1"))
            .unwrap();
        let e = s
            .register_link(FiberLink::new("L2", "OCS1", "OCS9", "T2", "R1"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::NotFound);
        let e = s
            .register_link(FiberLink::new("L3", "OCS1", "OCS2", "R1", "R2"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::InvalidRange);
        let e = s
            .register_link(FiberLink::new("L4", "OCS1", "OCS2", "T1", "R2"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::AlreadyExist);
        let e = s
            .register_link(FiberLink::new("L1", "OCS2", "OCS1", "T1", "R1"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::AlreadyExist);
        let e = s
            .register_link(FiberLink::new("L5", "OCS1", "OCS1", "T2", "R2"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::InvalidRange);
        assert!(s.audit().is_ok());
    }

    #[test]
    fn status_updates() {
        let mut s = two_switches();
        s.update_status("OCS1", ObjectType::Switch, ResourceStatus::Unavailable)
            .unwrap();
        assert_eq!(s.node("OCS1").unwrap().status, ResourceStatus::Unavailable);
        s.update_status("OCS1/R1", ObjectType::Port, ResourceStatus::Unavailable)
            .unwrap();
        assert!(!s.port_available("OCS1", "R1"));
        s.update_status("OCS1/R1", ObjectType::Port, ResourceStatus::Available)
            .unwrap();
        assert!(s.port_available("OCS1", "R1"));
        let e = s
            .update_status("OCS1/R9", ObjectType::Port, ResourceStatus::Available)
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::NotFound);
        let e = s
            .update_status("nope", ObjectType::Link, ResourceStatus::Available)
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::NotFound);
    }

    fn line_store() -> ResourceStore {
        // A -> OCS1 -> Z and B -> OCS1 -> Y, each duplex
        let mut s = ResourceStore::new();
        s.register_switch(OcsNode::new(
            "OCS1",
            conn(),
            ["T1", "T2", "T3", "T4"],
            ["R1", "R2", "R3", "R4"],
        ))
        .unwrap();
        for t in ["A", "Z", "B", "Y"] {
            s.register_terminal(Terminal::new(t, conn())).unwrap();
        }
        let wires = [("A", "1"), ("Z", "2"), ("B", "3"), ("Y", "4")];
        for (t, n) in wires {
            s.register_link(FiberLink::new(format!("{t}-in"), t, "OCS1", "tx", format!("R{n}")))
                .unwrap();
            s.register_link(FiberLink::new(format!("{t}-out"), "OCS1", t, format!("T{n}"), "rx"))
                .unwrap();
        }
        s
    }

    fn path(svc: &str, a: &str, z: &str, ain: &str, aout: &str, zin: &str, zout: &str) -> FiberPath {
        FiberPath {
            svc_id: svc.into(),
            a: a.into(),
            z: z.into(),
            hops: vec!["OCS1".into()],
            per_ocs_configs: [(
                "OCS1".to_string(),
                vec![
                    InternalConnection::new(format!("{svc}-fwd"), ain, zout),
                    InternalConnection::new(format!("{svc}-rev"), zin, aout),
                ],
            )]
            .into_iter()
            .collect(),
            status: ResourceStatus::Available,
        }
    }

    #[test]
    fn allocation_exclusivity() {
        let mut s = line_store();
        s.allocate_path(path("S1", "A", "Z", "R1", "T1", "R2", "T2")).unwrap();
        s.allocate_path(path("S2", "B", "Y", "R3", "T3", "R4", "T4")).unwrap();
        assert!(s.audit().is_ok());
        s.release_path("S2").unwrap();
        let e = s
            .allocate_path(path("S3", "B", "Z", "R3", "T3", "R2", "T2"))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::BlockingOccured);
        s.release_path("S1").unwrap();
        s.allocate_path(path("S1", "A", "Z", "R1", "T1", "R2", "T2")).unwrap();
        assert_eq!(s.link_owner("A-in"), Some("S1"));
        assert_eq!(s.port_owner("OCS1", "T2"), Some("S1"));
    }

    #[test]
    fn failed_allocation_leaves_store_untouched() {
        let mut s = line_store();
        s.allocate_path(path("S1", "A", "Z", "R1", "T1", "R2", "T2")).unwrap();
        let before = s.clone();
        assert!(s
            .allocate_path(path("S2", "A", "Y", "R1", "T1", "R4", "T4"))
            .is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn path_availability_marks_everything() {
        let mut s = line_store();
        s.allocate_path(path("S1", "A", "Z", "R1", "T1", "R2", "T2")).unwrap();
        s.set_path_availability("S1", ResourceStatus::Unavailable).unwrap();
        assert_eq!(s.node("OCS1").unwrap().status, ResourceStatus::Unavailable);
        assert!(!s.port_available("OCS1", "T2"));
        assert_eq!(s.link("Z-out").unwrap().status, ResourceStatus::Unavailable);
        assert_eq!(s.link("B-in").unwrap().status, ResourceStatus::Available);
        assert_eq!(s.path("S1").unwrap().status, ResourceStatus::Unavailable);
        let e = s
            .set_path_availability("nope", ResourceStatus::Available)
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::NotFound);
    }
}
