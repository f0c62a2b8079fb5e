//! Brute-force route oracle and random topology generator shared by the
//! FPCE property tests and the acceptance suite. Deliberately independent of
//! `FiberGraph`: usability and adjacency are re-derived from raw links.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ocs_model::{
    ConnInfo, FiberLink, ObjectType, OcsNode, ResourceStatus, ResourceStore, Terminal,
};
use proptest::prelude::*;

fn usable(store: &ResourceStore, l: &FiberLink) -> bool {
    let dev_ok = |id: &str| match (store.node(id), store.terminal(id)) {
        (Some(n), _) => n.status == ResourceStatus::Available,
        (_, Some(t)) => t.status == ResourceStatus::Available,
        _ => false,
    };
    l.status == ResourceStatus::Available
        && store.link_owner(&l.id).is_none()
        && dev_ok(&l.src)
        && dev_ok(&l.dst)
        && store.port_available(&l.src, &l.src_port)
        && store.port_available(&l.dst, &l.dst_port)
}

fn duplex(store: &ResourceStore, x: &str, y: &str) -> bool {
    let one = |s: &str, d: &str| store.links().any(|l| l.src == s && l.dst == d && usable(store, l));
    one(x, y) && one(y, x)
}

/// Every minimum-hop simple duplex route from `a` to `z`, sorted.
pub fn minimal_routes(store: &ResourceStore, a: &str, z: &str) -> Vec<Vec<String>> {
    let switches: Vec<String> = store
        .nodes()
        .filter(|n| n.status == ResourceStatus::Available)
        .map(|n| n.id.clone())
        .collect();
    let mut all = Vec::new();
    fn dfs(
        store: &ResourceStore,
        switches: &[String],
        z: &str,
        route: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        let last = route.last().unwrap().clone();
        if duplex(store, &last, z) {
            out.push(route.clone());
        }
        for s in switches {
            if !route.contains(s) && duplex(store, &last, s) {
                route.push(s.clone());
                dfs(store, switches, z, route, out);
                route.pop();
            }
        }
    }
    for s in &switches {
        if duplex(store, a, s) {
            let mut route = vec![s.clone()];
            dfs(store, &switches, z, &mut route, &mut all);
        }
    }
    let Some(best) = all.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    let mut min: Vec<Vec<String>> = all.into_iter().filter(|r| r.len() == best).collect();
    min.sort();
    min.dedup();
    min
}

#[derive(Debug, Clone)]
pub struct RandomTopology {
    pub switches: usize,
    /// (src, dst) indices; `switches` = terminal A, `switches + 1` = terminal Z.
    pub strands: Vec<(usize, usize)>,
    pub down_switches: Vec<bool>,
    pub down_links: Vec<bool>,
}

pub fn random_topology() -> impl Strategy<Value = RandomTopology> {
    (2usize..=12).prop_flat_map(|n| {
        let dev = 0..n + 2;
        (
            Just(n),
            (0..n, 0..n),
            proptest::collection::vec((dev.clone(), dev, proptest::bool::weighted(0.8)), 1..=20),
            proptest::collection::vec(proptest::bool::weighted(0.15), n),
            proptest::collection::vec(proptest::bool::weighted(0.15), 30),
        )
            .prop_map(|(n, (sa, sz), strands, down_switches, down_links)| RandomTopology {
                switches: n,
                // A and Z are always cabled to some switch, so routes are common
                strands: [(n, sa, true), (sz, n + 1, true)]
                    .into_iter()
                    .chain(strands)
                    // terminals never connect to each other directly
                    .filter(|(s, d, _)| s != d && (*s < n || *d < n))
                    .flat_map(|(s, d, both)| {
                        let back = both.then_some((d, s));
                        std::iter::once((s, d)).chain(back)
                    })
                    .take(30)
                    .collect(),
                down_switches,
                down_links,
            })
    })
}

impl RandomTopology {
    pub fn build(&self) -> ResourceStore {
        let n = self.switches;
        let name = |i: usize| match i {
            i if i == n => "A".to_string(),
            i if i == n + 1 => "Z".to_string(),
            i => format!("S{i:02}"),
        };
        let conn = ConnInfo::new("127.0.0.1", 1);
        let mut store = ResourceStore::new();
        let ports: Vec<String> = (0..32).map(|p| p.to_string()).collect();
        for i in 0..n {
            store
                .register_switch(OcsNode::new(
                    name(i),
                    conn.clone(),
                    ports.iter().map(|p| format!("T{p}")),
                    ports.iter().map(|p| format!("R{p}")),
                ))
                .unwrap();
        }
        store.register_terminal(Terminal::new("A", conn.clone())).unwrap();
        store.register_terminal(Terminal::new("Z", conn)).unwrap();
        let mut next_tx = vec![0usize; n + 2];
        let mut next_rx = vec![0usize; n + 2];
        let mut used = BTreeSet::new();
        for (k, (s, d)) in self.strands.iter().enumerate() {
            let sp = if *s < n { format!("T{}", next_tx[*s]) } else { format!("tx{}", next_tx[*s]) };
            let dp = if *d < n { format!("R{}", next_rx[*d]) } else { format!("rx{}", next_rx[*d]) };
            next_tx[*s] += 1;
            next_rx[*d] += 1;
            let id = format!("L{k:02}");
            used.insert(id.clone());
            store
                .register_link(FiberLink::new(&id, name(*s), name(*d), sp, dp))
                .unwrap();
        }
        for i in 0..n {
            if self.down_switches[i] {
                store
                    .update_status(&name(i), ObjectType::Switch, ResourceStatus::Unavailable)
                    .unwrap();
            }
        }
        for (k, _) in self.strands.iter().enumerate() {
            if self.down_links[k] {
                store
                    .update_status(&format!("L{k:02}"), ObjectType::Link, ResourceStatus::Unavailable)
                    .unwrap();
            }
        }
        store
    }
}
