//! Bulk topology documents (JSON or YAML).

use serde::{Deserialize, Serialize};

use crate::error::NbiError;
use crate::store::ResourceStore;
use crate::types::{ConnInfo, FiberLink, OcsNode, Terminal};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default)]
    pub switches: Vec<SwitchEntry>,
    #[serde(default)]
    pub terminals: Vec<TerminalEntry>,
    #[serde(default)]
    pub links: Vec<LinkEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEntry {
    pub id: String,
    pub host: String,
    pub port: u32,
    pub tx_ports: Vec<String>,
    pub rx_ports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalEntry {
    pub id: String,
    pub host: String,
    pub port: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEntry {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub src_port: String,
    pub dst_port: String,
}

fn conn(host: &str, port: u32) -> Result<ConnInfo, NbiError> {
    let port = u16::try_from(port)
        .ok()
        .filter(|p| *p != 0)
        .ok_or_else(|| NbiError::invalid_range(format!("port {port} outside 1..65535")))?;
    let c = ConnInfo::new(host, port);
    c.validate()?;
    Ok(c)
}

impl SwitchEntry {
    pub fn to_node(&self) -> Result<OcsNode, NbiError> {
        let mut tx = self.tx_ports.clone();
        let mut rx = self.rx_ports.clone();
        tx.sort();
        rx.sort();
        if tx.windows(2).any(|w| w[0] == w[1]) || rx.windows(2).any(|w| w[0] == w[1]) {
            return Err(NbiError::invalid_range(format!(
                "switch {} lists a port twice",
                self.id
            )));
        }
        Ok(OcsNode::new(
            self.id.clone(),
            conn(&self.host, self.port)?,
            tx,
            rx,
        ))
    }
}

impl TerminalEntry {
    pub fn to_terminal(&self) -> Result<Terminal, NbiError> {
        Ok(Terminal::new(self.id.clone(), conn(&self.host, self.port)?))
    }
}

impl LinkEntry {
    pub fn to_link(&self) -> FiberLink {
        FiberLink::new(
            self.id.clone(),
            self.src.clone(),
            self.dst.clone(),
            self.src_port.clone(),
            self.dst_port.clone(),
        )
    }
}

impl From<&FiberLink> for LinkEntry {
    fn from(l: &FiberLink) -> Self {
        LinkEntry {
            id: l.id.clone(),
            src: l.src.clone(),
            dst: l.dst.clone(),
            src_port: l.src_port.clone(),
            dst_port: l.dst_port.clone(),
        }
    }
}

impl TopologyDoc {
    /// Parses a JSON document, falling back to YAML. Blank input is an
    /// empty topology.
    pub fn parse(text: &str) -> Result<TopologyDoc, NbiError> {
        if text.trim().is_empty() {
            return Ok(TopologyDoc::default());
        }
        match serde_json::from_str(text) {
            Ok(doc) => Ok(doc),
            Err(json_err) => serde_yaml::from_str(text).map_err(|yaml_err| {
                NbiError::invalid_range(format!(
                    "topology file is neither valid JSON ({json_err}) nor YAML ({yaml_err})"
                ))
            }),
        }
    }

    pub fn from_store(store: &ResourceStore) -> TopologyDoc {
        TopologyDoc {
            switches: store
                .nodes()
                .map(|n| SwitchEntry {
                    id: n.id.clone(),
                    host: n.conn.host.clone(),
                    port: n.conn.port.into(),
                    tx_ports: n.tx_ports.iter().cloned().collect(),
                    rx_ports: n.rx_ports.iter().cloned().collect(),
                })
                .collect(),
            terminals: store
                .terminals()
                .map(|t| TerminalEntry {
                    id: t.id.clone(),
                    host: t.conn.host.clone(),
                    port: t.conn.port.into(),
                })
                .collect(),
            links: store.links().map(LinkEntry::from).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}

/// Builds topologies with duplex strands and auto-numbered switch ports.
///
/// Switch ports are allocated as `T1, T2, ..` and `R1, R2, ..` in the order
/// strands are added; terminals use `tx`/`rx`. Every endpoint gets the
/// placeholder address `127.0.0.1:1`, which a fleet rewrites on launch.
#[derive(Debug, Default, Clone)]
pub struct TopologyBuilder {
    doc: TopologyDoc,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn switch(mut self, id: &str) -> Self {
        self.doc.switches.push(SwitchEntry {
            id: id.into(),
            host: "127.0.0.1".into(),
            port: 1,
            tx_ports: Vec::new(),
            rx_ports: Vec::new(),
        });
        self
    }

    pub fn terminal(mut self, id: &str) -> Self {
        self.doc.terminals.push(TerminalEntry {
            id: id.into(),
            host: "127.0.0.1".into(),
            port: 1,
        });
        self
    }

    fn alloc(&mut self, id: &str, tx: bool) -> String {
        match self.doc.switches.iter_mut().find(|s| s.id == id) {
            Some(sw) => {
                let ports = if tx { &mut sw.tx_ports } else { &mut sw.rx_ports };
                let p = format!("{}{}", if tx { 'T' } else { 'R' }, ports.len() + 1);
                ports.push(p.clone());
                p
            }
            None => if tx { "tx" } else { "rx" }.to_string(),
        }
    }

    /// Adds one strand `src -> dst`. Parallel strands get ids suffixed
    /// `-2`, `-3`, ..
    pub fn simplex(mut self, src: &str, dst: &str) -> Self {
        let src_port = self.alloc(src, true);
        let dst_port = self.alloc(dst, false);
        let base = format!("{src}-{dst}");
        let taken = |id: &str| self.doc.links.iter().any(|l| l.id == id);
        let id = (2..)
            .map(|k| format!("{base}-{k}"))
            .find(|id| !taken(id))
            .filter(|_| taken(&base))
            .unwrap_or(base);
        self.doc.links.push(LinkEntry {
            id,
            src: src.into(),
            dst: dst.into(),
            src_port,
            dst_port,
        });
        self
    }

    /// Adds a strand in each direction between `x` and `y`.
    pub fn duplex(self, x: &str, y: &str) -> Self {
        self.simplex(x, y).simplex(y, x)
    }

    pub fn build(self) -> TopologyDoc {
        self.doc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorCode;

    const SMALL: &str = r#"{
        "switches": [{"id":"OCS1","host":"127.0.0.1","port":8301,"tx_ports":["T1","T2"],"rx_ports":["R1","R2"]}],
        "terminals": [{"id":"A","host":"127.0.0.1","port":9001}],
        "links": [{"id":"L1","src":"A","dst":"OCS1","src_port":"tx","dst_port":"R1"}]
    }"#;

    #[test]
    fn json_and_yaml_agree() {
        let j = TopologyDoc::parse(SMALL).unwrap();
        let yaml = serde_yaml::to_string(&j).unwrap();
        let y = TopologyDoc::parse(&yaml).unwrap();
        assert_eq!(j, y);
        assert_eq!(j.switches.len(), 1);
    }

    #[test]
    fn empty_and_garbage() {
        assert_eq!(TopologyDoc::parse("").unwrap(), TopologyDoc::default());
        assert_eq!(TopologyDoc::parse("{}").unwrap(), TopologyDoc::default());
        let e = TopologyDoc::parse("{\"switches\": 3}").unwrap_err();
        assert_eq!(e.code, ErrorCode::InvalidRange);
    }

    #[test]
    fn bulk_load_is_all_or_nothing() {
        let mut doc = TopologyDoc::parse(SMALL).unwrap();
        doc.switches.push(doc.switches[0].clone());
        let mut store = ResourceStore::new();
        let e = store.apply_network(&doc).unwrap_err();
        assert_eq!(e.code, ErrorCode::AlreadyExist);
        assert_eq!(store, ResourceStore::new());
    }

    #[test]
    fn builder_numbers_ports_per_switch() {
        let doc = TopologyBuilder::new()
            .switch("S1")
            .switch("S2")
            .terminal("A")
            .duplex("A", "S1")
            .duplex("S1", "S2")
            .build();
        let s1 = &doc.switches[0];
        assert_eq!(s1.tx_ports, ["T1", "T2"]);
        assert_eq!(s1.rx_ports, ["R1", "R2"]);
        let l = doc.links.iter().find(|l| l.id == "S1-S2").unwrap();
        assert_eq!((l.src_port.as_str(), l.dst_port.as_str()), ("T2", "R1"));
        let mut store = ResourceStore::new();
        store.apply_network(&doc).unwrap();
        assert_eq!(store.links().count(), 4);

        let par = TopologyBuilder::new().switch("X").switch("Y").duplex("X", "Y").duplex("X", "Y").build();
        let ids: Vec<&str> = par.links.iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, ["X-Y", "Y-X", "X-Y-2", "Y-X-2"]);
    }

    #[test]
    fn out_of_range_port() {
        let doc = TopologyDoc::parse(
            r#"{"terminals":[{"id":"A","host":"h","port":70000}]}"#,
        )
        .unwrap();
        let e = ResourceStore::new().apply_network(&doc).unwrap_err();
        assert_eq!(e.code, ErrorCode::InvalidRange);
    }
}
