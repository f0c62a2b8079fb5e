//! Reference topologies.

use ocs_model::{TopologyBuilder, TopologyDoc};

pub const R1: &[&str] = &["OCS1", "OCS3", "OCS5"];
pub const R2: &[&str] = &["OCS1", "OCS2", "OCS3", "OCS5"];
pub const R3: &[&str] = &["OCS1", "OCS2", "OCS4", "OCS3", "OCS5"];

pub const ROUTES: [(&str, &[&str]); 3] = [("R1", R1), ("R2", R2), ("R3", R3)];

pub fn route(name: &str) -> Option<&'static [&'static str]> {
    ROUTES.iter().find(|(n, _)| *n == name).map(|(_, r)| *r)
}

/// Five-switch testbed: terminal A on OCS1, Z on OCS5, three routes of
/// three, four and five hops. OCS3 is on all of them and sees each route
/// on its own ingress port. Default fleet vendors come out as
/// OCS1=A, OCS2=B, OCS3=C, OCS4=A, OCS5=B.
pub fn fig7() -> TopologyDoc {
    let mut b = TopologyBuilder::new();
    for i in 1..=5 {
        b = b.switch(&format!("OCS{i}"));
    }
    b.terminal("A")
        .terminal("Z")
        .duplex("A", "OCS1")
        .duplex("OCS1", "OCS3")
        .duplex("OCS1", "OCS2")
        .duplex("OCS2", "OCS3")
        .duplex("OCS2", "OCS4")
        .duplex("OCS4", "OCS3")
        .duplex("OCS3", "OCS5")
        .duplex("OCS5", "Z")
        .build()
}

/// Three disjoint chains of `n` switches that share their first and last
/// switch: `3n - 4` switches, every A-Z route `n` hops long.
pub fn fig12(n: usize) -> TopologyDoc {
    assert!(n >= 3, "chains need at least one interior switch");
    let mut b = TopologyBuilder::new().switch("E1").switch("E2").terminal("A").terminal("Z");
    for r in 1..=3 {
        for k in 1..=n - 2 {
            b = b.switch(&format!("C{r}-{k:03}"));
        }
    }
    b = b.duplex("A", "E1").duplex("E2", "Z");
    for r in 1..=3 {
        let mut prev = "E1".to_string();
        for k in 1..=n - 2 {
            let cur = format!("C{r}-{k:03}");
            b = b.duplex(&prev, &cur);
            prev = cur;
        }
        b = b.duplex(&prev, "E2");
    }
    b.build()
}

pub fn fig12_switches(n: usize) -> usize {
    3 * n - 4
}

/// `pairs` terminal pairs across an ingress switch, `middles` core
/// switches and an egress switch, with enough strands for every pair.
pub fn fat(pairs: usize, middles: usize) -> TopologyDoc {
    let mut b = TopologyBuilder::new().switch("IN").switch("OUT");
    for m in 1..=middles {
        b = b.switch(&format!("M{m}"));
    }
    for i in 0..pairs {
        let (a, z) = (fat_a(i), fat_z(i));
        b = b.terminal(&a).terminal(&z).duplex(&a, "IN").duplex("OUT", &z);
    }
    let per = pairs.div_ceil(middles);
    for m in 1..=middles {
        let mid = format!("M{m}");
        for _ in 0..per {
            b = b.duplex("IN", &mid).duplex(&mid, "OUT");
        }
    }
    b.build()
}

pub fn fat_a(i: usize) -> String {
    format!("A{i:03}")
}

pub fn fat_z(i: usize) -> String {
    format!("Z{i:03}")
}
