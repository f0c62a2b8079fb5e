use std::fs;
use std::io::Write;

use ocs_controller::wal::ResourceBody;
use ocs_controller::{ActionSpec, DurableState, EventSpec, EventType, HandlerBinding, PersistentRecord, RecordKind, RecordOp, Wal};
use ocs_model::{Fpce, ObjectType, PathRequest, ResourceStatus, TopologyBuilder, TopologyDoc};
use proptest::prelude::*;
use serde_json::{json, Value};

type Rec = (RecordKind, RecordOp, Value);

const PAIRS: usize = 3;

fn topology() -> TopologyDoc {
    let mut b = TopologyBuilder::new();
    for i in 1..=4 {
        b = b.switch(&format!("S{i}"));
    }
    for i in 0..PAIRS {
        b = b
            .terminal(&format!("A{i}"))
            .terminal(&format!("Z{i}"))
            .duplex(&format!("A{i}"), "S1")
            .duplex("S4", &format!("Z{i}"));
    }
    b.duplex("S1", "S2").duplex("S1", "S3").duplex("S2", "S4").duplex("S3", "S4").duplex("S2", "S3").build()
}

fn base() -> (DurableState, Vec<Rec>) {
    let doc = topology();
    let mut st = DurableState::default();
    st.store.apply_network(&doc).unwrap();
    (st.clone(), st.to_records())
}

#[derive(Debug, Clone)]
enum Op {
    Link(usize, bool),
    Switch(usize, bool),
    Port(usize, usize, bool),
    Create(usize),
    Delete(usize),
    Action(usize),
    DropAction(usize),
    Event(usize, f64),
    Bind(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..16usize, any::<bool>()).prop_map(|(i, u)| Op::Link(i, u)),
        (0..4usize, any::<bool>()).prop_map(|(i, u)| Op::Switch(i, u)),
        (0..4usize, 0..6usize, any::<bool>()).prop_map(|(i, p, u)| Op::Port(i, p, u)),
        (0..PAIRS).prop_map(Op::Create),
        (0..PAIRS).prop_map(Op::Create),
        (0..PAIRS).prop_map(Op::Delete),
        (0..PAIRS).prop_map(Op::Action),
        (0..PAIRS).prop_map(Op::DropAction),
        (0..3usize, -40.0..0.0f64).prop_map(|(i, t)| Op::Event(i, t)),
        (0..3usize, 0..PAIRS).prop_map(|(e, a)| Op::Bind(e, a)),
    ]
}

fn status(id: &str, ty: ObjectType, up: bool) -> Rec {
    let status = if up { ResourceStatus::Available } else { ResourceStatus::Unavailable };
    let body = ResourceBody::Status {
        object_id: id.into(),
        object_type: ty,
        status,
    };
    (RecordKind::Resource, RecordOp::Put, serde_json::to_value(body).unwrap())
}

/// The records a controller would log for `op`, if it succeeds.
fn records_for(st: &DurableState, op: &Op) -> Option<Vec<Rec>> {
    let links: Vec<String> = st.store.links().map(|l| l.id.clone()).collect();
    Some(match op {
        Op::Link(i, up) => vec![status(&links[i % links.len()], ObjectType::Link, *up)],
        Op::Switch(i, up) => vec![status(&format!("S{}", i + 1), ObjectType::Switch, *up)],
        Op::Port(i, p, up) => {
            let sw = st.store.node(&format!("S{}", i + 1))?;
            let port = sw.rx_ports.iter().chain(&sw.tx_ports).nth(*p)?;
            vec![status(&format!("S{}/{port}", i + 1), ObjectType::Port, *up)]
        }
        Op::Create(i) => {
            let svc = format!("svc{i}");
            if st.store.path(&svc).is_some() {
                return None;
            }
            let plan = Fpce::new()
                .compute_path(&st.store, &PathRequest::new(format!("A{i}"), format!("Z{i}")))
                .ok()?;
            vec![(RecordKind::Path, RecordOp::Put, serde_json::to_value(plan.to_fiber_path(&svc)).unwrap())]
        }
        Op::Delete(i) => {
            let svc = format!("svc{i}");
            st.store.path(&svc)?;
            vec![(RecordKind::Path, RecordOp::Delete, json!({ "svc_id": svc }))]
        }
        Op::Action(i) => {
            let a = ActionSpec {
                act_id: format!("act{i}"),
                svc_id: format!("svc{i}"),
                a: format!("A{i}"),
                z: format!("Z{i}"),
                pce_alg: None,
                ocs_list: None,
            };
            vec![(RecordKind::Action, RecordOp::Put, serde_json::to_value(a).unwrap())]
        }
        Op::DropAction(i) => {
            let id = format!("act{i}");
            st.actions.get(&id)?;
            let mut v = vec![(RecordKind::Action, RecordOp::Delete, json!({ "act_id": id }))];
            for h in st.handlers.iter().filter(|h| h.act_id() == id) {
                v.push((RecordKind::Handler, RecordOp::Delete, serde_json::to_value(h).unwrap()));
            }
            v
        }
        Op::Event(i, t) => {
            let e = EventSpec {
                event_id: format!("ev{i}"),
                event_type: if i % 2 == 0 { EventType::SignalDetection } else { EventType::SignalDegradation },
                ocs: "S2".into(),
                port: "R1".into(),
                threshold: *t,
            };
            vec![(RecordKind::Event, RecordOp::Put, serde_json::to_value(e).unwrap())]
        }
        Op::Bind(e, a) => {
            let h = HandlerBinding::Event {
                event_id: format!("ev{e}"),
                act_id: format!("act{a}"),
            };
            if !st.events.contains_key(&format!("ev{e}")) || !st.actions.contains_key(h.act_id()) || st.handlers.contains(&h) {
                return None;
            }
            vec![(RecordKind::Handler, RecordOp::Put, serde_json::to_value(h).unwrap())]
        }
    })
}

/// Applies records to a copy, as the controller's commit does.
fn apply(st: &DurableState, recs: &[Rec], first_seq: u64) -> Option<DurableState> {
    let mut next = st.clone();
    for (i, (kind, op, body)) in recs.iter().enumerate() {
        let rec = PersistentRecord {
            seq: first_seq + i as u64,
            kind: *kind,
            op: *op,
            body: body.clone(),
        };
        next.apply(&rec).ok()?;
    }
    Some(next)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_rebuilds_exactly_the_committed_state(ops in prop::collection::vec(op(), 0..40), cut in any::<prop::sample::Index>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.wal");
        let (wal, empty) = Wal::open(&path).unwrap();
        prop_assert_eq!(&empty, &DurableState::default());

        let (mut st, recs) = base();
        // state after each logged record, so a torn tail has an exact oracle
        let empty = DurableState::default();
        let mut per_record: Vec<DurableState> = (0..=recs.len()).map(|i| apply(&empty, &recs[..i], 1).unwrap()).collect();
        let mut seq = wal.append_batch(recs).unwrap() + 1;
        for op in &ops {
            let Some(recs) = records_for(&st, op) else { continue };
            let Some(next) = apply(&st, &recs, seq) else { continue };
            for i in 1..recs.len() {
                per_record.push(apply(&st, &recs[..i], seq).unwrap());
            }
            per_record.push(next.clone());
            seq = wal.append_batch(recs).unwrap() + 1;
            st = next;
        }
        prop_assert!(st.store.audit().is_ok());

        let (a, last) = Wal::replay(&path).unwrap();
        let (b, _) = Wal::replay(&path).unwrap();
        prop_assert_eq!(&a, &st);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(last, seq - 1);

        // a crash mid-append leaves a torn final line; replay ignores it
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let tail = lines[lines.len() - 1];
        let torn = &tail[..cut.index(tail.len())];
        let mut prefix = lines[..lines.len() - 1].join("\n");
        prefix.push('\n');
        prefix.push_str(torn);
        let torn_path = dir.path().join("torn.wal");
        fs::write(&torn_path, &prefix).unwrap();
        let (t, _) = Wal::replay(&torn_path).unwrap();
        prop_assert_eq!(&t, &per_record[per_record.len() - 2]);

        wal.compact(&st).unwrap();
        let (c, _) = Wal::replay(&path).unwrap();
        prop_assert_eq!(&c, &st);
        let compacted = fs::read_to_string(&path).unwrap().lines().count();
        prop_assert_eq!(compacted, st.to_records().len());
    }
}

#[test]
fn torn_tail_is_ignored_but_corruption_inside_is_not() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.wal");
    let (st, recs) = base();
    {
        let (wal, _) = Wal::open(&path).unwrap();
        wal.append_batch(recs).unwrap();
    }
    let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":999,"kind":"PA"#).unwrap();
    drop(f);
    let (got, _) = Wal::replay(&path).unwrap();
    assert_eq!(got, st);

    // reopening and appending after a torn tail still yields a readable log
    let (wal, got) = Wal::open(&path).unwrap();
    assert_eq!(got, st);
    wal.compact(&got).unwrap();
    wal.append(RecordKind::Action, RecordOp::Delete, json!({"act_id": "none"})).unwrap();
    assert_eq!(Wal::replay(&path).unwrap().0, st);

    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[1] = "garbage".into();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(Wal::replay(&path).is_err());
}

#[test]
fn sequence_numbers_are_strictly_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.wal");
    let (wal, _) = Wal::open(&path).unwrap();
    let (_, recs) = base();
    wal.append_batch(recs).unwrap();
    wal.append(RecordKind::Action, RecordOp::Delete, json!({"act_id": "x"})).unwrap();
    let seqs: Vec<u64> = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<PersistentRecord>(l).unwrap().seq)
        .collect();
    assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1));
    assert_eq!(seqs[0], 1);
}

#[test]
fn injected_failure_rejects_appends_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.wal");
    let (wal, _) = Wal::open(&path).unwrap();
    wal.inject_failure(true);
    let e = wal.append(RecordKind::Action, RecordOp::Delete, json!({"act_id": "x"})).unwrap_err();
    assert_eq!(e.code, ocs_model::ErrorCode::PathOperFailed);
    assert_eq!(fs::read_to_string(&path).unwrap(), "");
}
