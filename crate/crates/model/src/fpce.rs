//! Fiber-path computation.
//!
//! Routes are computed over *duplex adjacencies*: two devices are adjacent
//! when at least one usable strand runs in each direction between them. A
//! strand is usable when it, both of its endpoint devices and both of its
//! ports are AVAILABLE and no path currently holds it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NbiError, Result};
use crate::store::ResourceStore;
use crate::types::{
    forward_name, reverse_name, FiberLink, FiberPath, InternalConnection, ResourceStatus,
};

pub const DEFAULT_ALGORITHM: &str = "dijkstra";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathRequest {
    pub a: String,
    pub z: String,
    pub algorithm: Option<String>,
    pub forced_hops: Option<Vec<String>>,
}

impl PathRequest {
    pub fn new(a: impl Into<String>, z: impl Into<String>) -> Self {
        PathRequest {
            a: a.into(),
            z: z.into(),
            ..Default::default()
        }
    }

    pub fn with_algorithm(mut self, alg: impl Into<String>) -> Self {
        self.algorithm = Some(alg.into());
        self
    }

    pub fn with_hops<I, S>(mut self, hops: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.forced_hops = Some(hops.into_iter().map(Into::into).collect());
        self
    }
}

/// Grouped configuration for one switch within one path operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPayload {
    pub ocs_id: String,
    pub connections_to_create: Vec<InternalConnection>,
    pub connections_to_delete: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Strand {
    link_id: String,
    src_port: String,
    dst_port: String,
}

/// Usable-resource view of a store snapshot.
#[derive(Debug, Clone, Default)]
pub struct FiberGraph {
    switches: BTreeSet<String>,
    strands: BTreeMap<(String, String), BTreeSet<Strand>>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl FiberGraph {
    pub fn build(store: &ResourceStore) -> FiberGraph {
        let device_up = |id: &str| -> bool {
            if let Some(n) = store.node(id) {
                n.status.is_available()
            } else if let Some(t) = store.terminal(id) {
                t.status.is_available()
            } else {
                false
            }
        };
        let usable = |l: &FiberLink| -> bool {
            l.status == ResourceStatus::Available
                && store.link_owner(&l.id).is_none()
                && device_up(&l.src)
                && device_up(&l.dst)
                && store.port_available(&l.src, &l.src_port)
                && store.port_available(&l.dst, &l.dst_port)
        };

        let switches: BTreeSet<String> = store
            .nodes()
            .filter(|n| n.status.is_available())
            .map(|n| n.id.clone())
            .collect();
        let mut strands: BTreeMap<(String, String), BTreeSet<Strand>> = BTreeMap::new();
        for l in store.links().filter(|l| usable(l)) {
            strands
                .entry((l.src.clone(), l.dst.clone()))
                .or_default()
                .insert(Strand {
                    link_id: l.id.clone(),
                    src_port: l.src_port.clone(),
                    dst_port: l.dst_port.clone(),
                });
        }
        let mut adjacency: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (src, dst) in strands.keys() {
            if strands.contains_key(&(dst.clone(), src.clone())) {
                adjacency.entry(src.clone()).or_default().insert(dst.clone());
            }
        }
        FiberGraph {
            switches,
            strands,
            adjacency,
        }
    }

    pub fn is_switch(&self, id: &str) -> bool {
        self.switches.contains(id)
    }

    /// Devices duplex-adjacent to `id` (switches and terminals alike).
    pub fn neighbors<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.adjacency
            .get(id)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    /// Switches duplex-adjacent to `id`, in id order.
    pub fn switch_neighbors<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.neighbors(id).filter(move |n| self.is_switch(n))
    }

    pub fn adjacent(&self, x: &str, y: &str) -> bool {
        self.adjacency.get(x).is_some_and(|s| s.contains(y))
    }

    fn strand(&self, src: &str, dst: &str) -> Option<&Strand> {
        self.strands
            .get(&(src.to_string(), dst.to_string()))
            .and_then(|s| s.iter().next())
    }
}

/// A pluggable route search. Returns the ordered switch ids from the
/// switch attached to `a` to the switch attached to `z`, or `None`.
pub trait RouteAlgorithm: Send + Sync {
    fn route(&self, graph: &FiberGraph, a: &str, z: &str) -> Option<Vec<String>>;
}

/// Unit-weight Dijkstra. Among equal-hop routes the lexicographically
/// smallest hop sequence wins.
#[derive(Debug, Default, Clone, Copy)]
pub struct Dijkstra;

impl RouteAlgorithm for Dijkstra {
    fn route(&self, graph: &FiberGraph, a: &str, z: &str) -> Option<Vec<String>> {
        // distance (in switches) from each switch to terminal z, inclusive
        let mut dist: BTreeMap<&str, u32> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        for s in graph.switch_neighbors(z) {
            dist.insert(s, 1);
            heap.push(Reverse((1u32, s)));
        }
        while let Some(Reverse((d, s))) = heap.pop() {
            if dist.get(s).is_some_and(|&best| best < d) {
                continue;
            }
            for n in graph.switch_neighbors(s) {
                let nd = d + 1;
                if dist.get(n).is_none_or(|&cur| nd < cur) {
                    dist.insert(n, nd);
                    heap.push(Reverse((nd, n)));
                }
            }
        }

        let mut cur = graph
            .switch_neighbors(a)
            .filter_map(|s| dist.get(s).map(|d| (*d, s)))
            .min()?;
        let mut hops = vec![cur.1.to_string()];
        while cur.0 > 1 {
            let want = cur.0 - 1;
            let next = graph
                .switch_neighbors(cur.1)
                .find(|n| dist.get(n) == Some(&want))?;
            hops.push(next.to_string());
            cur = (want, next);
        }
        Some(hops)
    }
}

/// One switch on a computed route together with the four ports it uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedHop {
    pub ocs: String,
    /// Forward strand arrives here (from the A side).
    pub ingress_rx: String,
    /// Forward strand leaves here (towards Z).
    pub egress_tx: String,
    /// Reverse strand arrives here (from the Z side).
    pub egress_rx: String,
    /// Reverse strand leaves here (towards A).
    pub ingress_tx: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub a: String,
    pub z: String,
    pub hops: Vec<ResolvedHop>,
    pub links: Vec<String>,
}

impl RoutePlan {
    pub fn hop_ids(&self) -> Vec<String> {
        self.hops.iter().map(|h| h.ocs.clone()).collect()
    }

    pub fn to_fiber_path(&self, svc_id: &str) -> FiberPath {
        let per_ocs_configs = self
            .hops
            .iter()
            .map(|h| {
                (
                    h.ocs.clone(),
                    vec![
                        InternalConnection::new(forward_name(svc_id), &h.ingress_rx, &h.egress_tx),
                        InternalConnection::new(reverse_name(svc_id), &h.egress_rx, &h.ingress_tx),
                    ],
                )
            })
            .collect();
        FiberPath {
            svc_id: svc_id.to_string(),
            a: self.a.clone(),
            z: self.z.clone(),
            hops: self.hop_ids(),
            per_ocs_configs,
            status: ResourceStatus::Available,
        }
    }
}

/// One payload per hop creating the forward and reverse connections.
pub fn generate_configs(path: &FiberPath) -> Vec<ConfigPayload> {
    path.hops
        .iter()
        .map(|h| ConfigPayload {
            ocs_id: h.clone(),
            connections_to_create: path.per_ocs_configs.get(h).cloned().unwrap_or_default(),
            connections_to_delete: Vec::new(),
        })
        .collect()
}

/// One payload per hop deleting the path's connections by name.
pub fn generate_delete_configs(path: &FiberPath) -> Vec<ConfigPayload> {
    path.hops
        .iter()
        .map(|h| ConfigPayload {
            ocs_id: h.clone(),
            connections_to_create: Vec::new(),
            connections_to_delete: path
                .per_ocs_configs
                .get(h)
                .into_iter()
                .flatten()
                .map(|c| c.name.clone())
                .collect(),
        })
        .collect()
}

#[derive(Clone)]
pub struct Fpce {
    algorithms: BTreeMap<String, Arc<dyn RouteAlgorithm>>,
}

impl Default for Fpce {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Fpce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fpce")
            .field("algorithms", &self.algorithms.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Fpce {
    pub fn new() -> Self {
        let mut algorithms: BTreeMap<String, Arc<dyn RouteAlgorithm>> = BTreeMap::new();
        algorithms.insert(DEFAULT_ALGORITHM.to_string(), Arc::new(Dijkstra));
        Fpce { algorithms }
    }

    pub fn register_algorithm(
        &mut self,
        name: impl Into<String>,
        alg: Arc<dyn RouteAlgorithm>,
    ) -> Result<()> {
        let name = name.into();
        if self.algorithms.contains_key(&name) {
            return Err(NbiError::already_exist(format!("algorithm {name}")));
        }
        self.algorithms.insert(name, alg);
        Ok(())
    }

    pub fn algorithms(&self) -> impl Iterator<Item = &str> {
        self.algorithms.keys().map(String::as_str)
    }

    pub fn compute_path(&self, store: &ResourceStore, req: &PathRequest) -> Result<RoutePlan> {
        for t in [&req.a, &req.z] {
            if !store.is_terminal(t) {
                return Err(NbiError::not_found(format!("terminal {t}")));
            }
        }
        if req.a == req.z {
            return Err(NbiError::invalid_range("a and z must differ"));
        }
        let graph = FiberGraph::build(store);
        let hops = match &req.forced_hops {
            Some(hops) => {
                self.check_forced(store, &graph, req, hops)?;
                hops.clone()
            }
            None => {
                let name = req.algorithm.as_deref().unwrap_or(DEFAULT_ALGORITHM);
                let alg = self.algorithms.get(name).ok_or_else(|| {
                    NbiError::invalid_range(format!("unknown path algorithm {name:?}"))
                })?;
                let hops = alg.route(&graph, &req.a, &req.z).ok_or_else(|| {
                    NbiError::blocking(format!("no feasible path between {} and {}", req.a, req.z))
                })?;
                // a plugged-in algorithm is not trusted to return a valid route
                self.check_forced(store, &graph, req, &hops)?;
                hops
            }
        };
        resolve(&graph, req, &hops)
    }

    fn check_forced(
        &self,
        store: &ResourceStore,
        graph: &FiberGraph,
        req: &PathRequest,
        hops: &[String],
    ) -> Result<()> {
        if hops.is_empty() {
            return Err(NbiError::invalid_range("ocs_list is empty"));
        }
        let mut seen = BTreeSet::new();
        for h in hops {
            if !store.is_node(h) {
                return Err(NbiError::not_found(format!("switch {h}")));
            }
            if !seen.insert(h) {
                return Err(NbiError::invalid_range(format!("switch {h} repeated in ocs_list")));
            }
            if !graph.is_switch(h) {
                return Err(NbiError::blocking(format!("switch {h} is unavailable")));
            }
        }
        let chain: Vec<&str> = std::iter::once(req.a.as_str())
            .chain(hops.iter().map(String::as_str))
            .chain(std::iter::once(req.z.as_str()))
            .collect();
        for w in chain.windows(2) {
            if !graph.adjacent(w[0], w[1]) {
                return Err(NbiError::blocking(format!(
                    "no usable duplex strand pair between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

fn resolve(graph: &FiberGraph, req: &PathRequest, hops: &[String]) -> Result<RoutePlan> {
    let chain: Vec<&str> = std::iter::once(req.a.as_str())
        .chain(hops.iter().map(String::as_str))
        .chain(std::iter::once(req.z.as_str()))
        .collect();
    let mut links = Vec::new();
    let mut fwd = Vec::new();
    let mut rev = Vec::new();
    for w in chain.windows(2) {
        let f = graph.strand(w[0], w[1]);
        let r = graph.strand(w[1], w[0]);
        let (Some(f), Some(r)) = (f, r) else {
            return Err(NbiError::blocking(format!(
                "no usable duplex strand pair between {} and {}",
                w[0], w[1]
            )));
        };
        links.push(f.link_id.clone());
        links.push(r.link_id.clone());
        fwd.push(f);
        rev.push(r);
    }
    let resolved = hops
        .iter()
        .enumerate()
        .map(|(i, ocs)| ResolvedHop {
            ocs: ocs.clone(),
            ingress_rx: fwd[i].dst_port.clone(),
            egress_tx: fwd[i + 1].src_port.clone(),
            egress_rx: rev[i + 1].dst_port.clone(),
            ingress_tx: rev[i].src_port.clone(),
        })
        .collect();
    Ok(RoutePlan {
        a: req.a.clone(),
        z: req.z.clone(),
        hops: resolved,
        links,
    })
}
