use std::time::{Duration, Instant};

use ocs_emulator::*;
use ocs_model::InternalConnection;
use ocs_sbi::{converter_for, Vendor, VendorClient, VendorCommand, VendorReply};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::sync::broadcast;

const T: Duration = Duration::from_secs(3);

fn conn(name: &str, rx: &str, tx: &str) -> InternalConnection {
    InternalConnection::new(name, rx, tx)
}

async fn client(dev: &OcsEmulator) -> VendorClient {
    VendorClient::connect(&dev.addr().to_string(), converter_for(dev.vendor()), None, T)
        .await
        .unwrap()
}

#[tokio::test]
async fn starts_and_answers_every_dialect() {
    for v in Vendor::ALL {
        let dev = start_emulator("X", EmulatorProfile::new(v), "127.0.0.1:0").await.unwrap();
        assert!(dev.snapshot().connections.is_empty());
        let mut c = client(&dev).await;
        let r = c
            .exchange(
                &[
                    VendorCommand::Connect(conn("S1-fwd", "R1", "T2")),
                    VendorCommand::List,
                    VendorCommand::Power("R1".into()),
                ],
                T,
            )
            .await
            .unwrap();
        assert_eq!(r[0], VendorReply::Ok);
        assert_eq!(r[1], VendorReply::List(vec![conn("S1-fwd", "R1", "T2")]));
        assert_eq!(r[2], VendorReply::Power(DARK_DBM));
        assert_eq!(dev.snapshot().connections.len(), 1);
    }
}

#[tokio::test]
async fn address_in_use() {
    let a = start_emulator("a", EmulatorProfile::new(Vendor::A), "127.0.0.1:0").await.unwrap();
    let b = start_emulator("b", EmulatorProfile::new(Vendor::B), &a.addr().to_string()).await;
    assert!(b.is_err());
}

#[tokio::test]
async fn port_exclusivity_regardless_of_vendor() {
    for v in Vendor::ALL {
        let dev = start_emulator("X", EmulatorProfile::new(v), "127.0.0.1:0").await.unwrap();
        let mut c = client(&dev).await;
        let r = c
            .exchange(
                &[
                    VendorCommand::Connect(conn("a", "R1", "T1")),
                    VendorCommand::Connect(conn("b", "R1", "T2")),
                    VendorCommand::Connect(conn("c", "R2", "T1")),
                    VendorCommand::Connect(conn("a", "R3", "T3")),
                    VendorCommand::Connect(conn("d", "R99", "T3")),
                    VendorCommand::Disconnect("zz".into()),
                ],
                T,
            )
            .await
            .unwrap();
        assert_eq!(r[0], VendorReply::Ok);
        assert_eq!(r[1], VendorReply::Err("busy".into()), "{v}");
        assert_eq!(r[2], VendorReply::Err("busy".into()));
        assert_eq!(r[3], VendorReply::Err("exists".into()));
        assert_eq!(r[4], VendorReply::Err("unknown-port".into()));
        assert_eq!(r[5], VendorReply::Err("no-such-xc".into()));
        assert_eq!(dev.connections(), vec![conn("a", "R1", "T1")]);
    }
}

#[tokio::test]
async fn three_fault_signatures() {
    let down = start_emulator(
        "d",
        EmulatorProfile::new(Vendor::A).with_fault(FaultMode::ServerDown),
        "127.0.0.1:0",
    )
    .await
    .unwrap();
    assert!(TcpStream::connect(down.addr()).await.is_err());

    let mute = start_emulator(
        "m",
        EmulatorProfile::new(Vendor::B).with_fault(FaultMode::TimeoutAll),
        "127.0.0.1:0",
    )
    .await
    .unwrap();
    let mut c = client(&mute).await;
    let r = c
        .exchange(&[VendorCommand::Connect(conn("a", "R1", "T1"))], Duration::from_millis(200))
        .await;
    assert_eq!(r, Err("vendor timeout".into()));
    assert!(mute.connections().is_empty());

    let liar = start_emulator(
        "l",
        EmulatorProfile::new(Vendor::C).with_fault(FaultMode::LieOnApply),
        "127.0.0.1:0",
    )
    .await
    .unwrap();
    let mut c = client(&liar).await;
    let r = c.exchange(&[VendorCommand::Connect(conn("a", "R1", "T1"))], T).await.unwrap();
    assert_eq!(r, vec![VendorReply::Ok]);
    assert!(liar.snapshot().connections.is_empty());
}

#[tokio::test]
async fn server_down_at_runtime_drops_sessions_and_recovers() {
    let dev = start_emulator("x", EmulatorProfile::new(Vendor::A), "127.0.0.1:0").await.unwrap();
    let mut c = client(&dev).await;
    c.exchange(&[VendorCommand::List], T).await.unwrap();
    dev.set_fault(FaultMode::ServerDown).await.unwrap();
    assert!(c.exchange(&[VendorCommand::List], T).await.is_err());
    assert!(TcpStream::connect(dev.addr()).await.is_err());
    dev.set_fault(FaultMode::None).await.unwrap();
    let mut c = client(&dev).await;
    assert!(c.exchange(&[VendorCommand::List], T).await.is_ok());
}

#[tokio::test]
async fn threshold_events_are_edge_triggered() {
    let dev = start_emulator("x", EmulatorProfile::new(Vendor::A), "127.0.0.1:0").await.unwrap();
    let stream = TcpStream::connect(dev.addr()).await.unwrap();
    let (rd, mut wr) = stream.into_split();
    let mut lines = BufReader::new(rd).lines();
    wr.write_all(b"ALARM R1 HI -1\nALARM R1 LO -10\nALARM R2 HI -1\n").await.unwrap();
    for _ in 0..3 {
        assert_eq!(lines.next_line().await.unwrap().unwrap(), "OK");
    }
    dev.set_port_power("R2", -5.0).unwrap();
    dev.set_port_power("R1", 5.9).unwrap();
    dev.set_port_power("R1", 6.5).unwrap();
    dev.set_port_power("R1", -40.0).unwrap();
    assert_eq!(lines.next_line().await.unwrap().unwrap(), "EVT R1 HI 5.9");
    assert_eq!(lines.next_line().await.unwrap().unwrap(), "EVT R1 LO -40");
    assert!(dev.set_port_power("T1", 0.0).is_err());
}

#[tokio::test]
async fn pipelined_mutations_share_one_actuation() {
    let lat = Duration::from_millis(200);
    let dev = start_emulator(
        "x",
        EmulatorProfile::new(Vendor::B).with_latency(LatencyModel::Fixed(lat)),
        "127.0.0.1:0",
    )
    .await
    .unwrap();
    let mut c = client(&dev).await;
    let t0 = Instant::now();
    let cmds: Vec<_> = (1..=8)
        .map(|i| VendorCommand::Connect(conn(&format!("c{i}"), &format!("R{i}"), &format!("T{i}"))))
        .collect();
    let r = c.exchange(&cmds, T).await.unwrap();
    let took = t0.elapsed();
    assert!(r.iter().all(|r| *r == VendorReply::Ok));
    assert!(took >= lat && took < lat * 2, "{took:?}");
    assert_eq!(dev.latency_samples().len(), 1);

    // reads are not actuations
    let t0 = Instant::now();
    c.exchange(&[VendorCommand::List], T).await.unwrap();
    assert!(t0.elapsed() < lat);
    assert_eq!(dev.counts().reads, 1);
    assert_eq!(dev.counts().mutations, 8);
}

#[tokio::test]
async fn wire_lines_match_vendor_formats() {
    let expect = [
        (Vendor::A, "XC ADD S1-fwd R1 T2"),
        (Vendor::B, r#"{"op":"connect","label":"S1-fwd","in":"R1","out":"T2"}"#),
        (Vendor::C, "SET /xc/S1-fwd rx=R1 tx=T2"),
    ];
    for (v, line) in expect {
        let dev = start_emulator("x", EmulatorProfile::new(v), "127.0.0.1:0").await.unwrap();
        let mut c = client(&dev).await;
        c.exchange(&[VendorCommand::Connect(conn("S1-fwd", "R1", "T2"))], T)
            .await
            .unwrap();
        assert_eq!(dev.wire_log(), vec![line.to_string()]);
    }
}

#[test]
fn latency_fidelity() {
    let model = LatencyModel::normal(0.7, 0.07);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..1000).map(|_| model.sample(&mut rng).as_secs_f64()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - 0.7).abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 0.07).abs() < 0.02, "std {}", var.sqrt());
    }
}

#[tokio::test]
async fn device_events_reach_vendor_client_as_notifications() {
    let dev = start_emulator("x", EmulatorProfile::new(Vendor::C), "127.0.0.1:0").await.unwrap();
    let (tx, mut rx) = broadcast::channel(8);
    let mut c = VendorClient::connect(&dev.addr().to_string(), converter_for(Vendor::C), Some(tx), T)
        .await
        .unwrap();
    c.exchange(
        &[VendorCommand::Alarm {
            port: "R3".into(),
            hi: Some(-1.0),
            lo: None,
        }],
        T,
    )
    .await
    .unwrap();
    dev.set_port_power("R3", 5.9).unwrap();
    let n = tokio::time::timeout(T, rx.recv()).await.unwrap().unwrap();
    assert_eq!(n.port, "R3");
    assert_eq!(n.dbm, 5.9);
    assert_eq!(n.kind, ocs_sbi::AlarmKind::SignalDetected);
}
