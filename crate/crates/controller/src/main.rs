use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use ocs_controller::{serve, Controller, ControllerConfig, KillPoint, ReconcilePolicy};
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

/// Runs the controller and serves its northbound interface.
#[derive(Parser, Debug)]
#[command(name = "ocs-controller", version)]
struct Args {
    /// Northbound listen address.
    #[arg(long, default_value = "127.0.0.1:8830", env = "OCS_CONTROLLER_BIND")]
    bind: String,
    /// Directory for the state log, action journal and reconcile report.
    #[arg(long, default_value = "ocs-state")]
    state_dir: PathBuf,
    /// What reconciliation does with switches whose connections drifted.
    #[arg(long, default_value = "mark-unavailable")]
    policy: ReconcilePolicy,
    /// Seconds between device hello probes; 0 disables them.
    #[arg(long, default_value_t = 5.0)]
    hello_interval: f64,
    /// Mark devices AVAILABLE again when they answer hello after an outage.
    #[arg(long)]
    auto_restore_on_hello: bool,
    /// Southbound RPC timeout in seconds.
    #[arg(long, default_value_t = 3.0)]
    sbi_timeout: f64,
    /// Per-switch deadline for one configuration step, in seconds.
    #[arg(long, default_value_t = 3.0)]
    command_deadline: f64,
    /// Exit abruptly when path creation reaches this point (crash testing).
    #[arg(long, hide = true)]
    kill_at: Option<KillPoint>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let cfg = ControllerConfig {
        state_dir: Some(args.state_dir),
        policy: args.policy,
        sbi_timeout: Duration::from_secs_f64(args.sbi_timeout),
        command_deadline: Duration::from_secs_f64(args.command_deadline),
        hello_interval: (args.hello_interval > 0.0).then(|| Duration::from_secs_f64(args.hello_interval)),
        auto_restore_on_hello: args.auto_restore_on_hello,
        exit_on_kill: true,
    };
    let ctl = Controller::start(cfg).await?;
    ctl.set_kill_point(args.kill_at);
    let listener = TcpListener::bind(&args.bind).await?;
    let server = serve(listener, ctl.clone())?;
    tracing::info!(addr = %server.addr(), "northbound interface open");
    tokio::signal::ctrl_c().await?;
    server.shutdown();
    ctl.shutdown().await;
    Ok(())
}
