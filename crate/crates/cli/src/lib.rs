//! `ocsctl`: one northbound call per invocation, plus benchmark and
//! emulator launchers that need no running controller.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ocs_controller::api;
use ocs_controller::nbi::{ClientError, NbiClient};
use ocs_model::ErrorCode;
use serde_json::{json, Map, Value};

mod bench;
mod emulate;

pub use bench::Scenario;

/// Exit status when the controller cannot be reached or the connection drops.
pub const EXIT_TRANSPORT: i32 = 3;
/// Exit status when the controller does not answer within `--timeout`.
pub const EXIT_TIMEOUT: i32 = 4;
/// Exit status for local failures: unreadable files, missed benchmark targets.
pub const EXIT_LOCAL: i32 = 1;

/// Exit status for each northbound error code.
pub fn exit_code(code: ErrorCode) -> i32 {
    match code {
        ErrorCode::AlreadyExist => 10,
        ErrorCode::ConnectionFailed => 11,
        ErrorCode::NotFound => 12,
        ErrorCode::InvalidRange => 13,
        ErrorCode::BlockingOccured => 14,
        ErrorCode::PathOperFailed => 15,
    }
}

#[derive(Parser, Debug)]
#[command(name = "ocsctl", version, about = "Client for the OCS controller's northbound interface")]
pub struct Cli {
    /// Controller northbound address.
    #[arg(long, global = true, env = "OCSCTL_ADDR", default_value = "127.0.0.1:8830")]
    pub controller: String,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seconds to wait for the controller's answer.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub timeout: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Optical circuit switches.
    #[command(subcommand)]
    Switch(SwitchCmd),
    /// Transponders at the network edge.
    #[command(subcommand)]
    Terminal(TerminalCmd),
    /// Fiber strands between devices.
    #[command(subcommand)]
    Link(LinkCmd),
    /// Whole topologies.
    #[command(subcommand)]
    Network(NetworkCmd),
    /// Availability of switches, terminals, ports and links.
    #[command(subcommand)]
    Resource(ResourceCmd),
    /// Fiber paths.
    #[command(subcommand)]
    Path(PathCmd),
    /// Optical power events.
    #[command(subcommand)]
    Event(EventCmd),
    /// Actions run when events fire.
    #[command(subcommand)]
    Action(ActionCmd),
    /// Bindings from events and path alarms to actions.
    #[command(subcommand)]
    Handler(HandlerCmd),
    /// Run an experiment against an emulated fleet and print CSV.
    Bench(bench::BenchArgs),
    /// Run emulated devices.
    #[command(subcommand)]
    Emulate(emulate::EmulateCmd),
    /// Print the report of the controller's last start-up reconciliation.
    ReconcileReport {
        /// The controller's state directory.
        #[arg(long, default_value = "ocs-state")]
        state_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum SwitchCmd {
    /// Register a switch.
    Add {
        ocs_id: String,
        #[arg(long)]
        host: String,
        #[arg(long)]
        port: u16,
        /// Transmit ports, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        tx: Vec<String>,
        /// Receive ports, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        rx: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum TerminalCmd {
    /// Register a terminal.
    Add {
        terminal_id: String,
        #[arg(long)]
        host: String,
        #[arg(long)]
        port: u16,
    },
}

#[derive(Subcommand, Debug)]
pub enum LinkCmd {
    /// Register a one-way strand.
    Add {
        link_id: String,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        #[arg(long)]
        src_port: String,
        #[arg(long)]
        dst_port: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum NetworkCmd {
    /// Register every device and strand of a topology document.
    Create {
        file: PathBuf,
        /// Send the path for the controller to read instead of the contents.
        #[arg(long)]
        controller_side: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum ResourceCmd {
    /// Mark a resource AVAILABLE or UNAVAILABLE.
    Status {
        object_id: String,
        /// ocs, terminal, port or link.
        #[arg(long = "type")]
        object_type: String,
        #[arg(long)]
        status: String,
    },
}

#[derive(Args, Debug)]
pub struct Endpoints {
    /// Service id naming the path.
    #[arg(long)]
    pub svc: String,
    /// Terminal at one end.
    #[arg(long)]
    pub a: String,
    /// Terminal at the other end.
    #[arg(long)]
    pub z: String,
    /// Path computation algorithm.
    #[arg(long)]
    pub alg: Option<String>,
    /// Explicit route, comma separated switch ids.
    #[arg(long, value_delimiter = ',')]
    pub via: Option<Vec<String>>,
}

impl Endpoints {
    fn params(&self) -> api::PathParams {
        api::PathParams {
            svc_id: self.svc.clone(),
            a: self.a.clone(),
            z: self.z.clone(),
            pce_alg: self.alg.clone(),
            ocs_list: self.via.clone(),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum PathCmd {
    /// Compute and establish a path.
    Create(Endpoints),
    /// Release a path.
    Delete {
        #[arg(long)]
        svc: String,
    },
    /// Tear a path down and establish it again on a fresh route.
    Restore(Endpoints),
    /// Mark a path and everything it uses AVAILABLE or UNAVAILABLE.
    Availability {
        #[arg(long)]
        svc: String,
        #[arg(long)]
        status: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum EventCmd {
    /// Watch a switch port for a power threshold crossing.
    Add {
        #[arg(long)]
        id: String,
        /// SIGNAL_DETECTION or SIGNAL_DEGRADATION.
        #[arg(long = "type")]
        event_type: String,
        #[arg(long)]
        ocs: String,
        #[arg(long)]
        port: String,
        /// Threshold in dBm.
        #[arg(long, allow_negative_numbers = true)]
        threshold: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum ActionCmd {
    /// Define a path action.
    Create {
        #[arg(long)]
        id: String,
        #[command(flatten)]
        path: Endpoints,
    },
    /// Remove an action and its bindings.
    Delete {
        #[arg(long)]
        id: String,
        #[arg(long)]
        svc: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum HandlerCmd {
    /// Run an action when an event fires.
    Event {
        #[arg(long)]
        event: String,
        #[arg(long)]
        action: String,
    },
    /// Run an action when a path's terminals lose light.
    Alarm {
        #[arg(long)]
        svc: String,
        #[arg(long)]
        action: String,
    },
}

impl Command {
    /// The northbound method and parameters this command sends, if any.
    pub fn nbi_request(&self) -> anyhow::Result<Option<(&'static str, Value)>> {
        let v = |p: api::PathParams| serde_json::to_value(p).expect("parameters serialize");
        Ok(Some(match self {
            Command::Switch(SwitchCmd::Add { ocs_id, host, port, tx, rx }) => (
                api::ADD_SWITCH,
                json!({"ocs_id": ocs_id, "conn_info": {"host": host, "port": port}, "tx_ports": tx, "rx_ports": rx}),
            ),
            Command::Terminal(TerminalCmd::Add { terminal_id, host, port }) => (
                api::ADD_TERMINAL,
                json!({"terminal_id": terminal_id, "conn_info": {"host": host, "port": port}}),
            ),
            Command::Link(LinkCmd::Add { link_id, src, dst, src_port, dst_port }) => (
                api::ADD_LINK,
                json!({"link_id": link_id, "src": src, "dst": dst, "src_port": src_port, "dst_port": dst_port}),
            ),
            Command::Network(NetworkCmd::Create { file, controller_side }) => {
                let doc = if *controller_side {
                    Value::String(file.display().to_string())
                } else {
                    let text = std::fs::read_to_string(file)
                        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
                    serde_json::from_str(&text).unwrap_or(Value::String(text))
                };
                (api::CREATE_NETWORK, json!({ "topology_file": doc }))
            }
            Command::Resource(ResourceCmd::Status { object_id, object_type, status }) => (
                api::UPDATE_RESOURCE_STATUS,
                json!({"object_id": object_id, "object_type": object_type, "status": status}),
            ),
            Command::Path(PathCmd::Create(p)) => (api::CREATE_FIBER_PATH, v(p.params())),
            Command::Path(PathCmd::Delete { svc }) => (api::DELETE_FIBER_PATH, json!({ "svc_id": svc })),
            Command::Path(PathCmd::Restore(p)) => (api::RESTORE_FIBER_PATH, v(p.params())),
            Command::Path(PathCmd::Availability { svc, status }) => {
                (api::UPDATE_PATH_AVAILABILITY, json!({"svc_id": svc, "status": status}))
            }
            Command::Event(EventCmd::Add { id, event_type, ocs, port, threshold }) => (
                api::ADD_EVENT,
                json!({"event_id": id, "event_type": event_type, "ocs": ocs, "port": port, "threshold": threshold}),
            ),
            Command::Action(ActionCmd::Create { id, path }) => {
                let mut p = v(path.params());
                p["act_id"] = json!(id);
                (api::CREATE_ACTION, p)
            }
            Command::Action(ActionCmd::Delete { id, svc }) => (api::DELETE_ACTION, json!({"act_id": id, "svc_id": svc})),
            Command::Handler(HandlerCmd::Event { event, action }) => {
                (api::CREATE_EVENT_HANDLER, json!({"event_id": event, "act_id": action}))
            }
            Command::Handler(HandlerCmd::Alarm { svc, action }) => {
                (api::CREATE_ALARM_HANDLER, json!({"svc_id": svc, "act_id": action}))
            }
            Command::Bench(_) | Command::Emulate(_) | Command::ReconcileReport { .. } => return Ok(None),
        }))
    }
}

/// How `--json` wraps every outcome.
pub fn envelope(method: &str, outcome: &Result<Value, ClientError>) -> Value {
    match outcome {
        Ok(result) => json!({"ok": true, "method": method, "result": result}),
        Err(ClientError::Nbi(e)) => json!({
            "ok": false,
            "method": method,
            "error": {"code": e.code.as_str(), "message": e.message},
        }),
        Err(e) => json!({
            "ok": false,
            "method": method,
            "error": {"code": null, "message": e.to_string()},
        }),
    }
}

fn human(result: &Value) -> String {
    let Some(obj) = result.as_object() else {
        return result.to_string();
    };
    if let Some(hops) = obj.get("hops").and_then(Value::as_array) {
        let route: Vec<&str> = std::iter::once(&obj["a"])
            .chain(hops)
            .chain(std::iter::once(&obj["z"]))
            .filter_map(Value::as_str)
            .collect();
        let mut out = format!("{}: {}", obj["svc_id"].as_str().unwrap_or("?"), route.join(" -> "));
        if let Some(cfg) = obj.get("per_ocs_configs").and_then(Value::as_object) {
            for (ocs, conns) in cfg {
                for c in conns.as_array().into_iter().flatten() {
                    out.push_str(&format!(
                        "\n  {ocs:<10} {:<24} {} -> {}",
                        c["name"].as_str().unwrap_or(""),
                        c["rx"].as_str().unwrap_or(""),
                        c["tx"].as_str().unwrap_or("")
                    ));
                }
            }
        }
        return out;
    }
    flat(obj)
}

fn flat(obj: &Map<String, Value>) -> String {
    obj.iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}: {s}"),
            other => format!("{k}: {other}"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

async fn call(cli: &Cli, method: &'static str, params: Value) -> i32 {
    let timeout = Duration::from_secs_f64(cli.timeout);
    let outcome = match NbiClient::connect(&cli.controller, timeout).await {
        Ok(c) => c.call(method, params).await,
        Err(e) => Err(e),
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&envelope(method, &outcome)).expect("json"));
    }
    match outcome {
        Ok(v) => {
            if !cli.json {
                println!("{}", human(&v));
            }
            0
        }
        Err(e) => {
            if !cli.json {
                eprintln!("{method}: {e}");
            }
            match e {
                ClientError::Nbi(e) => exit_code(e.code),
                ClientError::Transport(_) => EXIT_TRANSPORT,
                ClientError::Timeout(_) => EXIT_TIMEOUT,
            }
        }
    }
}

fn reconcile_report(cli: &Cli, dir: &std::path::Path) -> i32 {
    let path = dir.join(ocs_controller::REPORT_FILE);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return EXIT_LOCAL;
        }
    };
    match serde_json::from_str::<Value>(&text) {
        Ok(v) if cli.json => println!("{}", serde_json::to_string_pretty(&v).expect("json")),
        Ok(Value::Object(m)) => println!("{}", flat(&m)),
        Ok(v) => println!("{v}"),
        Err(e) => {
            eprintln!("{} is not a report: {e}", path.display());
            return EXIT_LOCAL;
        }
    }
    0
}

/// Runs one invocation and returns its exit status.
pub async fn run(cli: Cli) -> i32 {
    match &cli.command {
        Command::Bench(args) => return report(bench::run(args, cli.json).await),
        Command::Emulate(cmd) => return report(emulate::run(cmd).await),
        Command::ReconcileReport { state_dir } => return reconcile_report(&cli, state_dir),
        _ => {}
    }
    match cli.command.nbi_request() {
        Ok(Some((method, params))) => call(&cli, method, params).await,
        Ok(None) => unreachable!("local commands handled above"),
        Err(e) => {
            eprintln!("{e:#}");
            EXIT_LOCAL
        }
    }
}

fn report(r: anyhow::Result<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e:#}");
            EXIT_LOCAL
        }
    }
}
