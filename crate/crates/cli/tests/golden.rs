//! `--json` output is compared byte for byte against files in
//! `tests/golden`. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::{Path, PathBuf};
use std::process::Command;

use ocs_controller::Controller;
use ocs_emulator::{Fleet, FleetConfig};
use ocs_testbed::{quiet_controller, topo, Testbed};

struct Step {
    name: &'static str,
    args: Vec<String>,
    exit: i32,
}

fn step(name: &'static str, exit: i32, args: &[&str]) -> Step {
    Step {
        name,
        args: args.iter().map(|s| s.to_string()).collect(),
        exit,
    }
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn ocsctl(addr: &str, args: &[String]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ocsctl"))
        .args(["--controller", addr, "--json"])
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[tokio::test(flavor = "multi_thread")]
async fn json_output_matches_golden_files() {
    let fleet = Fleet::launch(FleetConfig::new(topo::fig7())).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let topo_file = dir.path().join("fig7.json");
    std::fs::write(&topo_file, serde_json::to_string(&fleet.topology()).unwrap()).unwrap();
    let ctl = Controller::start(quiet_controller()).await.unwrap();
    let tb = Testbed::attach(fleet, ctl, false).await.unwrap();
    let addr = tb.nbi_addr().to_string();
    let topo_path = topo_file.display().to_string();

    let steps = vec![
        step("network_create", 0, &["network", "create", &topo_path]),
        step("path_create", 0, &["path", "create", "--svc", "S1", "--a", "A", "--z", "Z"]),
        step("path_create_again", 10, &["path", "create", "--svc", "S1", "--a", "A", "--z", "Z"]),
        step("path_restore", 0, &["path", "restore", "--svc", "S1", "--a", "A", "--z", "Z", "--via", "OCS1,OCS2,OCS3,OCS5"]),
        step("path_availability", 0, &["path", "availability", "--svc", "S1", "--status", "AVAILABLE"]),
        step("event_add", 0, &["event", "add", "--id", "E1", "--type", "SIGNAL_DEGRADATION", "--ocs", "OCS3", "--port", "R1", "--threshold", "-10"]),
        step("event_add_bad_threshold", 13, &["event", "add", "--id", "E2", "--type", "SIGNAL_DEGRADATION", "--ocs", "OCS3", "--port", "R1", "--threshold", "99"]),
        step("action_create", 0, &["action", "create", "--id", "ACT1", "--svc", "S1", "--a", "A", "--z", "Z"]),
        step("handler_event", 0, &["handler", "event", "--event", "E1", "--action", "ACT1"]),
        step("handler_alarm", 0, &["handler", "alarm", "--svc", "S1", "--action", "ACT1"]),
        step("action_delete", 0, &["action", "delete", "--id", "ACT1", "--svc", "S1"]),
        step("resource_status", 0, &["resource", "status", "OCS4", "--type", "ocs", "--status", "UNAVAILABLE"]),
        step("path_create_blocked", 14, &["path", "create", "--svc", "S2", "--a", "A", "--z", "Z"]),
        step("link_add_unknown_device", 12, &["link", "add", "L9", "--src", "NOPE", "--dst", "OCS2", "--src-port", "T1", "--dst-port", "R9"]),
        step("switch_add_unreachable", 11, &["switch", "add", "OCS9", "--host", "127.0.0.1", "--port", "1", "--tx", "T1", "--rx", "R1"]),
        step("terminal_add_unreachable", 11, &["terminal", "add", "B", "--host", "127.0.0.1", "--port", "1"]),
        step("path_delete", 0, &["path", "delete", "--svc", "S1"]),
        step("path_delete_again", 12, &["path", "delete", "--svc", "S1"]),
    ];

    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut mismatches = Vec::new();
    for s in steps {
        let a = addr.clone();
        let args = s.args.clone();
        let (code, stdout, stderr) = tokio::task::spawn_blocking(move || ocsctl(&a, &args)).await.unwrap();
        assert_eq!(code, s.exit, "{}: exit {code}, stderr {stderr}, stdout {stdout}", s.name);
        let v: serde_json::Value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{}: {e}: {stdout}", s.name));
        assert_eq!(v["ok"], serde_json::json!(code == 0), "{}", s.name);
        let file = golden_dir().join(format!("{}.json", s.name));
        if update {
            std::fs::write(&file, &stdout).unwrap();
        } else if std::fs::read_to_string(&file).ok().as_deref() != Some(stdout.as_str()) {
            mismatches.push(format!("{}:\n{stdout}", s.name));
        }
    }
    assert!(mismatches.is_empty(), "golden mismatch:\n{}", mismatches.join("\n"));
    tb.shutdown().await;
}

#[test]
fn unreachable_controller_has_its_own_exit_code() {
    let (code, stdout, _) = ocsctl("127.0.0.1:1", &["path".into(), "delete".into(), "--svc".into(), "S1".into()]);
    assert_eq!(code, ocsctl::EXIT_TRANSPORT);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["error"]["code"], serde_json::Value::Null);
}
