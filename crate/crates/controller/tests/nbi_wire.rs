mod support;

use std::time::Duration;

use ocs_controller::api::METHODS;
use ocs_controller::{serve, ClientError, NbiClient, PathParams};
use ocs_model::ErrorCode;
use serde_json::{json, Value};
use support::*;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};

const T: Duration = Duration::from_secs(5);

async fn up() -> (Rig, ocs_controller::NbiServer) {
    let rig = Rig::start(fig7()).await;
    let srv = serve(TcpListener::bind("127.0.0.1:0").await.unwrap(), rig.ctl.clone()).unwrap();
    (rig, srv)
}

/// Sends raw lines and reads one reply per line.
async fn raw(addr: std::net::SocketAddr, lines: &[&str]) -> Vec<Value> {
    let s = TcpStream::connect(addr).await.unwrap();
    let (rd, mut wr) = s.into_split();
    for l in lines {
        wr.write_all(format!("{l}\n").as_bytes()).await.unwrap();
    }
    let mut rd = BufReader::new(rd).lines();
    let mut out = Vec::new();
    for _ in lines {
        let l = tokio::time::timeout(T, rd.next_line()).await.unwrap().unwrap().unwrap();
        out.push(serde_json::from_str(&l).unwrap());
    }
    out
}

#[tokio::test]
async fn request_frames_round_trip() {
    let (_rig, srv) = up().await;
    let replies = raw(
        srv.addr(),
        &[r#"{"id":7,"method":"CreateFiberPath","params":{"svc_id":"svc1","a":"A","z":"Z"}}"#],
    )
    .await;
    let r = &replies[0];
    assert_eq!(r["id"], 7);
    assert!(r.get("error").is_none(), "{r}");
    assert_eq!(r["result"]["svc_id"], "svc1");
    assert_eq!(r["result"]["hops"], json!(["OCS1", "OCS3", "OCS5"]));
}

#[tokio::test]
async fn malformed_and_unknown_frames_get_error_replies() {
    let (_rig, srv) = up().await;
    let replies = raw(
        srv.addr(),
        &[
            "this is not json",
            r#"{"id":"q","method":"Frobnicate","params":{}}"#,
            r#"{"id":3,"params":{}}"#,
            r#"{"id":4,"method":"CreateFiberPath","params":{"svc_id":5}}"#,
        ],
    )
    .await;
    let mut by_id = std::collections::BTreeMap::new();
    for r in &replies {
        by_id.insert(r["id"].to_string(), r["error"].clone());
        assert!(r.get("result").is_none());
    }
    for id in ["null", "\"q\"", "3", "4"] {
        let e = &by_id[id];
        assert_eq!(e["code"], "InvalidRange", "id {id}: {e}");
        assert!(e["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[tokio::test]
async fn every_method_answers_with_a_result_or_a_closed_error() {
    let (_rig, srv) = up().await;
    let client = NbiClient::connect(&srv.addr().to_string(), T).await.unwrap();
    for m in METHODS {
        for params in [json!({}), json!(null), json!([1, 2]), json!({"svc_id": "x", "a": 1})] {
            match client.call(m, params.clone()).await {
                Ok(_) => {}
                Err(ClientError::Nbi(e)) => assert!(ErrorCode::ALL.contains(&e.code)),
                Err(other) => panic!("{m} {params}: {other}"),
            }
        }
    }
}

#[tokio::test]
async fn interleaved_clients_each_get_their_own_replies() {
    let (_rig, srv) = up().await;
    let addr = srv.addr().to_string();
    let mut tasks = Vec::new();
    for i in 0..6 {
        let addr = addr.clone();
        tasks.push(tokio::spawn(async move {
            let c = NbiClient::connect(&addr, T).await.unwrap();
            let mut seen = Vec::new();
            for j in 0..10 {
                let err = c.delete_fiber_path(&format!("ghost-{i}-{j}")).await.unwrap_err();
                let ClientError::Nbi(e) = err else { panic!("transport error") };
                assert_eq!(e.code, ErrorCode::NotFound);
                assert!(e.message.contains(&format!("ghost-{i}-{j}")), "{}", e.message);
                seen.push(j);
            }
            seen.len()
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), 10);
    }
}

#[tokio::test]
async fn one_connection_carries_concurrent_requests() {
    let (rig, srv) = up().await;
    let c = NbiClient::connect(&srv.addr().to_string(), T).await.unwrap();
    let req = PathParams::new("svc1", "A", "Z");
    let (a, b) = tokio::join!(
        c.create_fiber_path(&req),
        c.call("UpdateResourceStatus", json!({"object_id": "OCS2", "object_type": "ocs", "status": "UNAVAILABLE"}))
    );
    assert_eq!(a.unwrap().svc_id, "svc1");
    assert_eq!(b.unwrap()["status"], "UNAVAILABLE");
    assert!(rig.ctl.store().path("svc1").is_some());
}

#[tokio::test]
async fn client_reports_transport_failures_distinctly() {
    let l = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = l.local_addr().unwrap().to_string();
    drop(l);
    let e = NbiClient::connect(&addr, T).await.err().unwrap();
    assert!(matches!(e, ClientError::Transport(_)));
    assert_eq!(e.code(), None);
}
