use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Subcommand;
use ocs_emulator::{FaultMode, Fleet, FleetConfig, LatencyModel};
use ocs_model::TopologyDoc;
use ocs_testbed::topo;

#[derive(Subcommand, Debug)]
pub enum EmulateCmd {
    /// Start emulated switches and terminals and keep them running.
    Fleet {
        /// Topology document, or fig7, fig12:<n> or fat:<pairs>:<middles>.
        topology: String,
        /// normal:<mean>:<std>, fixed:<seconds> or zero.
        #[arg(long, default_value = "normal:0.7:0.07")]
        latency: LatencyModel,
        /// Start a device faulty, as <ocs>=<mode>; repeatable.
        #[arg(long, value_parser = parse_fault)]
        fault: Vec<(String, FaultMode)>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the running topology here for `network create`.
        #[arg(long)]
        write_topology: Option<PathBuf>,
    },
}

fn parse_fault(s: &str) -> Result<(String, FaultMode), String> {
    let (ocs, mode) = s.split_once('=').ok_or("expected <ocs>=<mode>")?;
    Ok((ocs.to_string(), mode.parse()?))
}

fn topology(spec: &str) -> anyhow::Result<TopologyDoc> {
    let num = |s: &str| s.parse::<usize>().map_err(|e| anyhow!("{spec}: {e}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["fig7"] => Ok(topo::fig7()),
        ["fig12", n] => Ok(topo::fig12(num(n)?)),
        ["fat", p, m] => Ok(topo::fat(num(p)?, num(m)?)),
        _ => {
            let text = std::fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {spec}"))
        }
    }
}

pub async fn run(cmd: &EmulateCmd) -> anyhow::Result<()> {
    let EmulateCmd::Fleet {
        topology: spec,
        latency,
        fault,
        seed,
        write_topology,
    } = cmd;
    let cfg = FleetConfig::new(topology(spec)?).with_latency(*latency).with_seed(*seed);
    let fleet = Fleet::launch(cfg).await?;
    for (ocs, mode) in fault {
        fleet.set_fault(ocs, *mode).await?;
    }
    let doc = serde_json::to_string_pretty(&fleet.topology())?;
    match write_topology {
        Some(p) => std::fs::write(p, &doc).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{doc}"),
    }
    eprintln!(
        "{} switches and {} terminals running; Ctrl-C stops them",
        fleet.topology().switches.len(),
        fleet.topology().terminals.len()
    );
    tokio::signal::ctrl_c().await?;
    fleet.shutdown();
    Ok(())
}
