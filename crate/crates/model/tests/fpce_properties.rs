mod support;

use std::collections::BTreeSet;

use ocs_model::{ErrorCode, Fpce, ObjectType, PathRequest, ResourceStatus, TopologyDoc, ResourceStore};
use proptest::prelude::*;
use support::oracle::{minimal_routes, random_topology};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dijkstra_matches_brute_force(topo in random_topology()) {
        let store = topo.build();
        let oracle = minimal_routes(&store, "A", "Z");
        let got = Fpce::new().compute_path(&store, &PathRequest::new("A", "Z"));
        match got {
            Ok(plan) => {
                prop_assert!(!oracle.is_empty());
                prop_assert_eq!(plan.hop_ids().len(), oracle[0].len());
                // tie-break: lexicographically smallest minimal route
                prop_assert_eq!(&plan.hop_ids(), &oracle[0]);
                // feasibility: every strand used is available and unoccupied
                for l in &plan.links {
                    let link = store.link(l).unwrap();
                    prop_assert_eq!(link.status, ResourceStatus::Available);
                    prop_assert!(store.link_owner(l).is_none());
                }
                // allocation of the resulting path must succeed
                let mut s2 = store.clone();
                prop_assert!(s2.allocate_path(plan.to_fiber_path("P")).is_ok());
                prop_assert!(s2.audit().is_ok());
            }
            Err(e) => {
                prop_assert_eq!(e.code, ErrorCode::BlockingOccured);
                prop_assert!(oracle.is_empty());
            }
        }
    }

    #[test]
    fn deterministic(topo in random_topology()) {
        let store = topo.build();
        let f = Fpce::new();
        let a = f.compute_path(&store, &PathRequest::new("A", "Z"));
        let b = f.compute_path(&store, &PathRequest::new("A", "Z"));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn availability_masking(topo in random_topology(), pick in any::<prop::sample::Index>()) {
        let mut store = topo.build();
        let ids: Vec<String> = store.nodes().map(|n| n.id.clone()).collect();
        let down = pick.get(&ids).clone();
        let before = Fpce::new().compute_path(&store, &PathRequest::new("A", "Z"));
        store.update_status(&down, ObjectType::Switch, ResourceStatus::Unavailable).unwrap();
        if let Ok(plan) = Fpce::new().compute_path(&store, &PathRequest::new("A", "Z")) {
            prop_assert!(!plan.hop_ids().contains(&down));
        }
        // unmarking only restores when the switch was up to begin with
        if !topo.down_switches[ids.iter().position(|i| *i == down).unwrap()] {
            store.update_status(&down, ObjectType::Switch, ResourceStatus::Available).unwrap();
            prop_assert_eq!(Fpce::new().compute_path(&store, &PathRequest::new("A", "Z")), before);
        }
    }

    #[test]
    fn second_path_never_double_books(topo in random_topology()) {
        let mut store = topo.build();
        let f = Fpce::new();
        if let Ok(p) = f.compute_path(&store, &PathRequest::new("A", "Z")) {
            store.allocate_path(p.to_fiber_path("P1")).unwrap();
            if let Ok(q) = f.compute_path(&store, &PathRequest::new("A", "Z")) {
                let p_links: BTreeSet<_> = p.links.iter().collect();
                prop_assert!(q.links.iter().all(|l| !p_links.contains(l)));
                store.allocate_path(q.to_fiber_path("P2")).unwrap();
            }
            prop_assert!(store.audit().is_ok());
        }
    }

    #[test]
    fn bulk_load_equals_sequential(topo in random_topology()) {
        let store = topo.build();
        let doc = TopologyDoc::from_store(&store);
        let mut bulk = ResourceStore::new();
        bulk.apply_network(&doc).unwrap();
        let mut seq = ResourceStore::new();
        for s in &doc.switches { seq.register_switch(s.to_node().unwrap()).unwrap(); }
        for t in &doc.terminals { seq.register_terminal(t.to_terminal().unwrap()).unwrap(); }
        for l in &doc.links { seq.register_link(l.to_link()).unwrap(); }
        prop_assert_eq!(bulk.snapshot(), seq.snapshot());
        let reparsed = TopologyDoc::parse(&doc.to_json()).unwrap();
        prop_assert_eq!(reparsed, doc);
    }
}

#[test]
fn generator_produces_both_outcomes() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let (mut ok, mut blocked) = (0, 0);
    for _ in 0..200 {
        let topo = random_topology().new_tree(&mut runner).unwrap().current();
        if minimal_routes(&topo.build(), "A", "Z").is_empty() { blocked += 1 } else { ok += 1 }
    }
    assert!(ok > 40 && blocked > 20, "feasible {ok}, blocked {blocked}");
}
