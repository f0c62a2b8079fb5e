mod support;

use std::time::Duration;

use ocs_controller::api::{UpdatePathAvailability, UpdateResourceStatus};
use ocs_controller::{ControllerConfig, PathParams};
use ocs_emulator::{FaultMode, FleetConfig};
use ocs_model::{forward_name, reverse_name, ErrorCode, ObjectType, ResourceStatus, TopologyBuilder};
use serde_json::json;
use support::*;

fn a_to_z(svc: &str) -> PathParams {
    PathParams::new(svc, "A", "Z")
}

fn down(ctl: &ocs_controller::Controller, id: &str, ty: ObjectType) {
    ctl.update_resource_status(UpdateResourceStatus {
        object_id: id.into(),
        object_type: ty,
        status: ResourceStatus::Unavailable,
    })
    .unwrap();
}

#[tokio::test]
async fn create_then_delete_is_an_inverse() {
    let rig = Rig::start(fig7()).await;
    let devices_before = rig.fleet.connection_state();
    let store_before = rig.ctl.store();

    let p = rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    assert_eq!(p.hops, hops(&["OCS1", "OCS3", "OCS5"]));
    for hop in &p.hops {
        let mut names: Vec<String> = rig.fleet.device(hop).unwrap().connections().into_iter().map(|c| c.name).collect();
        names.sort();
        assert_eq!(names, [forward_name("svc1"), reverse_name("svc1")], "on {hop}");
        let mut expect = p.per_ocs_configs[hop].clone();
        let mut got = rig.fleet.device(hop).unwrap().connections();
        expect.sort();
        got.sort();
        assert_eq!(got, expect);
    }
    for idle in ["OCS2", "OCS4"] {
        assert!(rig.fleet.device(idle).unwrap().connections().is_empty());
    }
    assert_eq!(rig.ctl.store().path("svc1"), Some(&p));

    rig.ctl.delete_fiber_path("svc1").await.unwrap();
    assert_eq!(rig.fleet.connection_state(), devices_before);
    assert_eq!(rig.ctl.store(), store_before);
}

#[tokio::test]
async fn light_crosses_an_established_path() {
    let rig = Rig::start(fig7()).await;
    rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    rig.fleet.terminal("A").unwrap().set_laser(Some(0.0));
    rig.fleet.terminal("Z").unwrap().set_laser(Some(1.0));
    assert_eq!(rig.fleet.terminal("Z").unwrap().rx_power(), 0.0);
    assert_eq!(rig.fleet.terminal("A").unwrap().rx_power(), 1.0);
}

#[tokio::test]
async fn duplicate_service_id_is_rejected_without_side_effects() {
    let rig = Rig::start(fig7()).await;
    rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    let (state, devices) = (rig.ctl.durable_state(), rig.fleet.connection_state());
    let e = rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::AlreadyExist);
    assert_eq!(rig.ctl.durable_state(), state);
    assert_eq!(rig.fleet.connection_state(), devices);
}

#[tokio::test]
async fn concurrent_creates_of_one_service_admit_exactly_one() {
    let rig = Rig::start(fig7()).await;
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let ctl = rig.ctl.clone();
        tasks.push(tokio::spawn(async move { ctl.create_fiber_path(a_to_z("svc1")).await }));
    }
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            Ok(_) => ok += 1,
            Err(e) => assert_eq!(e.code, ErrorCode::AlreadyExist),
        }
    }
    assert_eq!(ok, 1);
    assert_eq!(rig.fleet.device("OCS3").unwrap().connections().len(), 2);
}

#[tokio::test]
async fn unknown_endpoints_and_unreachable_pairs() {
    let topo = TopologyBuilder::new()
        .switch("S1")
        .switch("S2")
        .terminal("A")
        .terminal("Z")
        .duplex("A", "S1")
        .duplex("Z", "S2")
        .build();
    let rig = Rig::start(topo).await;
    let e = rig.ctl.create_fiber_path(PathParams::new("x", "A", "Q")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::NotFound);
    let e = rig.ctl.create_fiber_path(PathParams::new("x", "A", "Z")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::BlockingOccured);
    let e = rig.ctl.delete_fiber_path("x").await.unwrap_err();
    assert_eq!(e.code, ErrorCode::NotFound);
    assert!(rig.ctl.store().paths().next().is_none());
    assert!(rig.fleet.connection_state().values().all(Vec::is_empty));
}

#[tokio::test]
async fn occupied_terminal_ports_block_a_second_path() {
    let rig = Rig::start(fig7()).await;
    rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    let e = rig.ctl.create_fiber_path(a_to_z("svc2")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::BlockingOccured);
}

#[tokio::test]
async fn explicit_hop_list_is_followed() {
    let rig = Rig::start(fig7()).await;
    let route = ["OCS1", "OCS2", "OCS4", "OCS3", "OCS5"];
    let p = rig.ctl.create_fiber_path(a_to_z("long").via(route)).await.unwrap();
    assert_eq!(p.hops, hops(&route));
    assert!(rig.fleet.connection_state().values().all(|c| c.len() == 2));

    rig.ctl.delete_fiber_path("long").await.unwrap();
    let e = rig
        .ctl
        .create_fiber_path(a_to_z("bad").via(["OCS1", "OCS4", "OCS5"]))
        .await
        .unwrap_err();
    assert_eq!(e.code, ErrorCode::BlockingOccured);
}

#[tokio::test]
async fn restore_walks_through_the_alternates_then_blocks() {
    let rig = Rig::start(fig7()).await;
    let ctl = &rig.ctl;
    ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();

    down(ctl, "OCS1-OCS3", ObjectType::Link);
    let p = ctl.restore_fiber_path(a_to_z("svc1")).await.unwrap();
    assert_eq!(p.hops, hops(&["OCS1", "OCS2", "OCS3", "OCS5"]));
    assert_eq!(rig.fleet.device("OCS2").unwrap().connections().len(), 2);

    down(ctl, "OCS2-OCS3", ObjectType::Link);
    let p = ctl.restore_fiber_path(a_to_z("svc1")).await.unwrap();
    assert_eq!(p.hops, hops(&["OCS1", "OCS2", "OCS4", "OCS3", "OCS5"]));
    // the previous route's cross-connect on OCS3 was replaced, not added to
    assert_eq!(rig.fleet.device("OCS3").unwrap().connections().len(), 2);

    down(ctl, "OCS4-OCS3", ObjectType::Link);
    let e = ctl.restore_fiber_path(a_to_z("svc1")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::BlockingOccured);
    assert!(ctl.store().path("svc1").is_none());
    assert!(rig.fleet.connection_state().values().all(Vec::is_empty));
}

#[tokio::test]
async fn restore_validates_its_arguments() {
    let rig = Rig::start(fig7()).await;
    let e = rig.ctl.restore_fiber_path(a_to_z("nope")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::NotFound);
    rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    let devices = rig.fleet.connection_state();
    let e = rig.ctl.restore_fiber_path(PathParams::new("svc1", "Z", "A")).await.unwrap_err();
    assert_eq!(e.code, ErrorCode::InvalidRange);
    assert_eq!(rig.fleet.connection_state(), devices);
}

#[tokio::test]
async fn path_availability_propagates_to_its_resources() {
    let rig = Rig::start(fig7()).await;
    let p = rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    rig.ctl
        .update_path_availability(UpdatePathAvailability {
            svc_id: "svc1".into(),
            status: ResourceStatus::Unavailable,
        })
        .unwrap();
    let store = rig.ctl.store();
    assert_eq!(store.path("svc1").unwrap().status, ResourceStatus::Unavailable);
    for hop in &p.hops {
        assert_eq!(store.node(hop).unwrap().status, ResourceStatus::Unavailable);
    }
    for l in store.path_links(&p).unwrap() {
        assert_eq!(store.link(&l).unwrap().status, ResourceStatus::Unavailable);
    }
    assert_eq!(store.node("OCS2").unwrap().status, ResourceStatus::Available);
    let e = rig
        .ctl
        .update_path_availability(UpdatePathAvailability {
            svc_id: "ghost".into(),
            status: ResourceStatus::Available,
        })
        .unwrap_err();
    assert_eq!(e.code, ErrorCode::NotFound);
}

#[tokio::test]
async fn delete_with_a_switch_down_keeps_the_path() {
    let cfg = ControllerConfig {
        sbi_timeout: Duration::from_millis(500),
        command_deadline: Duration::from_millis(500),
        ..ControllerConfig::default().without_health_checks()
    };
    let rig = Rig::with(FleetConfig::new(fig7()), cfg).await;
    let p = rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    let devices = rig.fleet.connection_state();
    rig.fleet.set_fault("OCS3", FaultMode::ServerDown).await.unwrap();

    let e = rig.ctl.delete_fiber_path("svc1").await.unwrap_err();
    assert_eq!(e.code, ErrorCode::PathOperFailed);
    assert_eq!(rig.ctl.store().path("svc1"), Some(&p));
    assert_eq!(rig.fleet.connection_state(), devices);
    assert_eq!(rig.ctl.store().node("OCS3").unwrap().status, ResourceStatus::Unavailable);
}

#[tokio::test]
async fn create_against_a_failing_switch_is_all_or_nothing() {
    for fault in [FaultMode::ServerDown, FaultMode::TimeoutAll, FaultMode::LieOnApply] {
        let cfg = ControllerConfig {
            sbi_timeout: Duration::from_millis(400),
            command_deadline: Duration::from_millis(400),
            ..ControllerConfig::default().without_health_checks()
        };
        let rig = Rig::with(FleetConfig::new(fig7()), cfg).await;
        rig.fleet.set_fault("OCS5", fault).await.unwrap();
        let store = rig.ctl.store();

        let e = rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap_err();
        assert_eq!(e.code, ErrorCode::PathOperFailed, "{fault:?}");
        rig.fleet.clear_faults().await.unwrap();
        assert!(rig.fleet.connection_state().values().all(Vec::is_empty), "{fault:?}");
        assert!(rig.ctl.store().path("svc1").is_none());
        // only the suspect switch changed
        let after = rig.ctl.store();
        assert_eq!(after.node("OCS5").unwrap().status, ResourceStatus::Unavailable);
        for id in ["OCS1", "OCS2", "OCS3", "OCS4"] {
            assert_eq!(after.node(id), store.node(id));
        }
    }
}

#[tokio::test]
async fn rejected_requests_leave_no_trace() {
    let rig = Rig::start(fig7()).await;
    rig.ctl.create_fiber_path(a_to_z("svc1")).await.unwrap();
    let state = rig.ctl.durable_state();
    let devices = rig.fleet.snapshot();
    let bad = [
        ("CreateFiberPath", json!({"svc_id": "svc1", "a": "A", "z": "Z"})),
        ("CreateFiberPath", json!({"svc_id": "", "a": "A", "z": "Z"})),
        ("CreateFiberPath", json!({"svc_id": "s", "a": "A", "z": "Z", "pce_alg": "nope"})),
        ("CreateFiberPath", json!({"svc_id": "s", "a": "A"})),
        ("DeleteFiberPath", json!({"svc_id": "ghost"})),
        ("RestoreFiberPath", json!({"svc_id": "svc1", "a": "A", "z": "A"})),
        ("UpdateResourceStatus", json!({"object_id": "OCS9", "object_type": "ocs", "status": "UNAVAILABLE"})),
        ("UpdateResourceStatus", json!({"object_id": "OCS1", "object_type": "ocs", "status": "BROKEN"})),
        ("AddLink", json!({"link_id": "OCS1-OCS3", "src": "OCS1", "dst": "OCS3", "src_port": "T9", "dst_port": "R9"})),
        ("AddEvent", json!({"event_id": "e", "event_type": "SIGNAL_DETECTION", "ocs": "OCS1", "port": "R99", "threshold": -10.0})),
        ("AddEvent", json!({"event_id": "e", "event_type": "SIGNAL_DETECTION", "ocs": "OCS1", "port": "R1", "threshold": 99.0})),
        ("CreateAction", json!({"act_id": "x", "svc_id": "s", "a": "A", "z": "Q"})),
        ("CreateEventHandler", json!({"event_id": "none", "act_id": "none"})),
        ("CreateAlarmHandler", json!({"svc_id": "svc1", "act_id": "none"})),
        ("DeleteAction", json!({"act_id": "none", "svc_id": "svc1"})),
    ];
    for (method, params) in bad {
        let r = rig.ctl.handle(method, params.clone()).await;
        assert!(r.is_err(), "{method} {params} succeeded");
        assert_eq!(rig.ctl.durable_state(), state, "{method} {params}");
        assert_eq!(rig.fleet.snapshot(), devices, "{method} {params}");
    }
}
