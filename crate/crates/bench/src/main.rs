use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dcnet_bench::{compare_baseline, run_experiment, write_csv, ExperimentSpec, Mode};
use dcnet_core::crypto::GroupBackend;
use dcnet_core::node::Optimisations;
use dcnet_sim::CostModel;

/// Runs simulated dcnet groups and writes one CSV row per run plus a
/// min/median/max summary row per series.
#[derive(Parser, Debug)]
#[command(name = "dcnet-bench", version)]
struct Args {
    /// Group sizes: `8,12,16` or a range `8-24:2`.
    #[arg(long, default_value = "8", value_parser = parse_list)]
    nodes: List,
    /// Sending members, same syntax as --nodes.
    #[arg(long, default_value = "4", value_parser = parse_list)]
    senders: List,
    /// Bytes per message.
    #[arg(long, default_value_t = 512)]
    msg_size: usize,
    #[arg(long, default_value_t = 100.0)]
    latency_ms: f64,
    #[arg(long, default_value_t = 50.0)]
    bandwidth_mbps: f64,
    /// secured, unsecured or auto.
    #[arg(long, default_value = "unsecured")]
    mode: Mode,
    /// `none`, `all`, or any of deferred, precompute, direct joined by `+`.
    #[arg(long, default_value = "none")]
    opt: Optimisations,
    #[arg(long, default_value_t = 100)]
    iterations: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Senders use the slot of their roster position. For benchmarks only:
    /// it avoids slot collisions but links every message to its sender.
    #[arg(long)]
    fixed_slots: bool,
    /// Also run the fixed-length baseline with slots of --msg-size bytes.
    #[arg(long)]
    baseline: bool,
    /// Commitment group: secp256k1, or linear for fast large simulations
    /// (simulated time comes from the cost model either way).
    #[arg(long, default_value = "secp256k1", value_parser = parse_backend)]
    backend: GroupBackend,
    /// Charged time per scalar multiplication.
    #[arg(long, default_value_t = CostModel::default().scalar_mul_ns)]
    scalar_mul_ns: u64,
    /// Charged time per point addition.
    #[arg(long, default_value_t = CostModel::default().point_add_ns)]
    point_add_ns: u64,
    /// Threads each member spreads group operations over.
    #[arg(long, default_value_t = CostModel::default().threads)]
    threads: u32,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct List(Vec<usize>);

fn parse_list(s: &str) -> Result<List, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once('-') {
            Some((a, rest)) => {
                let (b, step) = rest.split_once(':').map_or((rest, "1"), |(b, st)| (b, st));
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step == 0 || a > b {
                    return Err(format!("bad range `{part}`"));
                }
                out.extend((a..=b).step_by(step));
            }
            None => out.push(num(part)?),
        }
    }
    Ok(List(out))
}

fn parse_backend(s: &str) -> Result<GroupBackend, String> {
    match s {
        "secp256k1" => Ok(GroupBackend::Secp256k1),
        "linear" => Ok(GroupBackend::Linear),
        other => Err(format!("unknown backend `{other}` (secp256k1, linear)")),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = ExperimentSpec {
        nodes: args.nodes.0,
        senders: args.senders.0,
        msg_size: args.msg_size,
        latency_ms: args.latency_ms,
        bandwidth_mbps: args.bandwidth_mbps,
        mode: args.mode,
        opts: args.opt,
        iterations: args.iterations,
        seed: args.seed,
        fixed_slots: args.fixed_slots,
        baseline: args.baseline,
        backend: args.backend,
        cost: CostModel {
            scalar_mul_ns: args.scalar_mul_ns,
            point_add_ns: args.point_add_ns,
            threads: args.threads,
        },
    };
    let rows = if spec.baseline {
        compare_baseline(&spec)
    } else {
        run_experiment(&spec)
    };
    let result = rows.and_then(|rows| match &args.out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?)),
        None => write_csv(&rows, io::stdout().lock()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dcnet-bench: {e}");
            ExitCode::from(2)
        }
    }
}
