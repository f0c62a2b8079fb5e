use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use ocs_emulator::FaultMode;
use ocs_testbed::bench::{self, summarize, to_csv, Summary};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Path establishment and release per route on the five-switch testbed.
    Fig9,
    /// Rollback time with one to three switches down.
    Fig10,
    /// Event-driven setup and restoration.
    Fig11,
    /// Establishment and release on large chain topologies.
    Fig13,
    /// Unified interface versus direct vendor protocol.
    Overhead,
    /// Every failure subset on the five-hop route.
    Atomicity,
    /// Many simultaneous events on a wide topology.
    Storm,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    pub scenario: Scenario,
    /// Runs per configuration.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Seed for the emulated device latencies.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Route length for fig13; repeat for several.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [16, 32, 64])]
    pub n: Vec<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Check {
    label: String,
    stats: Summary,
    target: Option<f64>,
}

impl Check {
    fn new(label: impl Into<String>, xs: impl IntoIterator<Item = f64>, target: Option<f64>) -> Check {
        Check {
            label: label.into(),
            stats: summarize(xs),
            target,
        }
    }

    fn met(&self) -> bool {
        self.target.is_none_or(|t| self.stats.max < t)
    }
}

fn group<T>(rows: &[T], key: impl Fn(&T) -> String) -> Vec<(String, Vec<&T>)> {
    let mut out: Vec<(String, Vec<&T>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => out.push((k, vec![r])),
        }
    }
    out
}

pub async fn run(args: &BenchArgs, json_out: bool) -> anyhow::Result<()> {
    let (csv, checks) = match args.scenario {
        Scenario::Fig9 => {
            let rows = bench::fig9(args.runs, args.seed).await?;
            let checks = group(&rows, |r| format!("{} {}", r.route, r.op))
                .into_iter()
                .map(|(k, g)| Check::new(k, g.iter().map(|r| r.secs), Some(1.0)))
                .collect();
            (to_csv(&rows)?, checks)
        }
        Scenario::Fig10 => {
            let rows = bench::fig10(args.runs, args.seed).await?;
            let checks = group(&rows, |r| format!("{} down", r.failed_switches))
                .into_iter()
                .map(|(k, g)| Check::new(k, g.iter().filter_map(|r| r.rollback_s), Some(0.90)))
                .collect();
            (to_csv(&rows)?, checks)
        }
        Scenario::Fig11 => {
            let a = bench::fig11a(args.runs, args.seed).await?;
            let b = bench::fig11b(args.runs, args.seed).await?;
            let mut checks: Vec<Check> = group(&a, |r| format!("detect {}", r.route))
                .into_iter()
                .map(|(k, g)| Check::new(k, g.iter().map(|r| r.secs), Some(2.0)))
                .collect();
            checks.extend(
                group(&b, |r| format!("case {} {}->{}", r.case, r.from, r.to))
                    .into_iter()
                    .map(|(k, g)| Check::new(k, g.iter().map(|r| r.secs), Some(3.0))),
            );
            (format!("{}\n{}", to_csv(&a)?, to_csv(&b)?), checks)
        }
        Scenario::Fig13 => {
            let rows = bench::fig13(&args.n, args.runs, args.seed).await?;
            let checks = group(&rows, |r| format!("n={} ({} switches) {}", r.n, r.switches, r.op))
                .into_iter()
                .map(|(k, g)| Check::new(k, g.iter().map(|r| r.secs), Some(1.0)))
                .collect();
            (to_csv(&rows)?, checks)
        }
        Scenario::Overhead => {
            let mut rows = bench::overhead(&[1, 2, 4, 8], 0.0, args.runs).await?;
            let zero: Vec<f64> = rows.iter().map(|r| r.delta_s).collect();
            rows.extend(bench::overhead(&[1, 2, 4, 8], 0.7, 2).await?);
            let ratio: Vec<f64> = rows.iter().filter(|r| r.latency_s > 0.0).map(|r| r.delta_ratio).collect();
            let checks = vec![
                Check::new("delta at zero latency", zero, Some(0.30)),
                Check::new("delta share at 0.7s latency", ratio, Some(0.50)),
            ];
            (to_csv(&rows)?, checks)
        }
        Scenario::Atomicity => {
            let rows = bench::atomicity(&[FaultMode::ServerDown]).await?;
            let other = rows.iter().filter(|r| r.state == bench::GlobalState::Other).count();
            let checks = vec![Check::new("subsets ending in a third state", [other as f64], Some(1.0))];
            (to_csv(&rows)?, checks)
        }
        Scenario::Storm => {
            let o = bench::event_storm(100, args.seed).await?;
            let bad = (o.actions_failed + o.double_booked_ports + o.dark_terminals) as f64;
            let checks = vec![Check::new("failed, double-booked or dark", [bad], Some(1.0))];
            (to_csv(&[o])?, checks)
        }
    };

    match &args.out {
        Some(p) => std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    for c in &checks {
        let s = &c.stats;
        if json_out {
            eprintln!(
                "{}",
                json!({"group": c.label, "count": s.count, "mean": s.mean, "min": s.min, "max": s.max, "target": c.target, "met": c.met()})
            );
        } else {
            let target = c.target.map_or(String::new(), |t| {
                format!(" target < {t}: {}", if c.met() { "met" } else { "MISSED" })
            });
            eprintln!(
                "{:<28} n={:<3} mean={:.3} min={:.3} max={:.3}{target}",
                c.label, s.count, s.mean, s.min, s.max
            );
        }
    }
    if checks.iter().any(|c| !c.met()) {
        bail!("target missed");
    }
    Ok(())
}
