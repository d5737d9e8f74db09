//! Experiment harness: runs groups of simulated participants and reports one
//! CSV row per run plus min/median/max summaries.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `protocol` | `dcnet` or `baseline` |
//! | `iteration` | 0-based run index, or `summary` |
//! | `k`, `senders`, `msg_size` | group size, sending members, bytes per message |
//! | `mode` | `secured`, `unsecured` or `auto` |
//! | `optimisations` | e.g. `deferred+precompute`, or `none` |
//! | `sim_runtime_ms` | simulated time from the first member starting the instance to the last member finishing it; the median on summary rows |
//! | `min_runtime_ms`, `max_runtime_ms` | summary rows only |
//! | `bytes_total` | envelope bytes sent by all members, headers included |
//! | `commitments_generated` | commitments computed during rounds, all members |
//! | `commitments_precomputed` | commitments computed while idle, all members |
//! | `commitments_verified` | commitment checks, all members |
//!
//! Counters on summary rows are medians. Every run executes exactly one
//! protocol instance.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use dcnet_core::crypto::GroupBackend;
use dcnet_core::node::{Optimisations, ParticipantConfig};
use dcnet_core::state::ModePolicy;
use dcnet_sim::{coordinator_run, CostModel, NetConfig, Protocol, RunLog, Scenario, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const CSV_HEADER: [&str; 14] = [
    "protocol",
    "iteration",
    "k",
    "senders",
    "msg_size",
    "mode",
    "optimisations",
    "sim_runtime_ms",
    "min_runtime_ms",
    "max_runtime_ms",
    "bytes_total",
    "commitments_generated",
    "commitments_precomputed",
    "commitments_verified",
];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    Usage(String),
    #[error("k={k} senders={senders} iteration {iteration}: {source}")]
    Sim {
        k: usize,
        senders: usize,
        iteration: u32,
        source: SimError,
    },
    #[error("k={k} senders={senders} iteration {iteration}: the instance did not finish")]
    Unfinished {
        k: usize,
        senders: usize,
        iteration: u32,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Secured,
    Unsecured,
    Auto,
}

impl Mode {
    pub fn policy(self) -> ModePolicy {
        match self {
            Mode::Secured => ModePolicy::AlwaysSecured,
            Mode::Unsecured => ModePolicy::AlwaysUnsecured,
            Mode::Auto => ModePolicy::Auto,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Secured => "secured",
            Mode::Unsecured => "unsecured",
            Mode::Auto => "auto",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "secured" => Ok(Mode::Secured),
            "unsecured" => Ok(Mode::Unsecured),
            "auto" => Ok(Mode::Auto),
            other => Err(format!("unknown mode `{other}` (secured, unsecured, auto)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub nodes: Vec<usize>,
    pub senders: Vec<usize>,
    pub msg_size: usize,
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
    pub mode: Mode,
    pub opts: Optimisations,
    pub iterations: u32,
    pub seed: u64,
    /// Senders take the slot of their roster position. Evaluation only: it
    /// removes slot collisions but makes senders linkable.
    pub fixed_slots: bool,
    pub baseline: bool,
    pub backend: GroupBackend,
    pub cost: CostModel,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            nodes: vec![8],
            senders: vec![4],
            msg_size: 512,
            latency_ms: 100.0,
            bandwidth_mbps: 50.0,
            mode: Mode::Unsecured,
            opts: Optimisations::NONE,
            iterations: 100,
            seed: 1,
            fixed_slots: false,
            baseline: false,
            backend: GroupBackend::Secp256k1,
            cost: CostModel::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let usage = |m: String| Err(BenchError::Usage(m));
        if self.nodes.is_empty() || self.senders.is_empty() {
            return usage("need at least one group size and one sender count".into());
        }
        if let Some(k) = self
            .nodes
            .iter()
            .find(|k| !(2..=u16::MAX as usize).contains(*k))
        {
            return usage(format!("group size {k} outside 2..=65535"));
        }
        let k_min = *self.nodes.iter().min().expect("non-empty");
        if let Some(s) = self.senders.iter().find(|s| **s > k_min) {
            return usage(format!("{s} senders exceed the group size {k_min}"));
        }
        if self.iterations == 0 {
            return usage("iterations must be at least 1".into());
        }
        if !(1..=u16::MAX as usize).contains(&self.msg_size) {
            return usage(format!("message size {} outside 1..=65535", self.msg_size));
        }
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return usage(format!("latency {} ms", self.latency_ms));
        }
        if !(self.bandwidth_mbps.is_finite() && self.bandwidth_mbps > 0.0) {
            return usage(format!("bandwidth {} Mbit/s", self.bandwidth_mbps));
        }
        if self.baseline && self.senders.iter().any(|s| *s > 2 * k_min) {
            return usage("baseline senders exceed its slot count".into());
        }
        Ok(())
    }

    fn participant_config(&self) -> ParticipantConfig {
        ParticipantConfig {
            policy: self.mode.policy(),
            opts: self.opts,
            fixed_slots: self.fixed_slots,
            max_instances: Some(1),
            backend: self.backend,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub protocol: &'static str,
    /// `None` on summary rows.
    pub iteration: Option<u32>,
    pub k: usize,
    pub senders: usize,
    pub msg_size: usize,
    pub mode: String,
    pub optimisations: String,
    pub sim_runtime_ms: f64,
    pub min_runtime_ms: Option<f64>,
    pub max_runtime_ms: Option<f64>,
    pub bytes_total: u64,
    pub commitments_generated: u64,
    pub commitments_precomputed: u64,
    pub commitments_verified: u64,
}

impl Row {
    pub fn is_summary(&self) -> bool {
        self.iteration.is_none()
    }

    fn record(&self) -> [String; 14] {
        let ms = |v: f64| format!("{v:.3}");
        [
            self.protocol.to_string(),
            self.iteration.map_or("summary".into(), |i| i.to_string()),
            self.k.to_string(),
            self.senders.to_string(),
            self.msg_size.to_string(),
            self.mode.clone(),
            self.optimisations.clone(),
            ms(self.sim_runtime_ms),
            self.min_runtime_ms.map_or(String::new(), ms),
            self.max_runtime_ms.map_or(String::new(), ms),
            self.bytes_total.to_string(),
            self.commitments_generated.to_string(),
            self.commitments_precomputed.to_string(),
            self.commitments_verified.to_string(),
        ]
    }
}

/// Per-run seed: a splitmix64 step over the experiment seed and run coordinates.
fn run_seed(seed: u64, k: usize, senders: usize, iteration: u32) -> u64 {
    let mut z = seed ^ ((k as u64) << 40) ^ ((senders as u64) << 20) ^ u64::from(iteration);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn scenario(
    spec: &ExperimentSpec,
    protocol: Protocol,
    k: usize,
    senders: usize,
    seed: u64,
) -> Scenario {
    let mut s = Scenario::new(k, protocol);
    s.net = NetConfig::new(spec.latency_ms, spec.bandwidth_mbps).with_seed(seed);
    s.cost = spec.cost;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in 0..senders {
        let mut m = vec![0u8; spec.msg_size];
        rng.fill(&mut m[..]);
        s.messages.insert(i, vec![m]);
    }
    s
}

fn row_from_log(
    protocol: &'static str,
    spec: &ExperimentSpec,
    mode: String,
    optimisations: String,
    (k, senders, iteration): (usize, usize, u32),
    log: &RunLog,
) -> Result<Row, BenchError> {
    let runtime = log.runtime_ms(1).ok_or(BenchError::Unfinished {
        k,
        senders,
        iteration,
    })?;
    let ops = log.ops_total();
    Ok(Row {
        protocol,
        iteration: Some(iteration),
        k,
        senders,
        msg_size: spec.msg_size,
        mode,
        optimisations,
        sim_runtime_ms: runtime,
        min_runtime_ms: None,
        max_runtime_ms: None,
        bytes_total: log.bytes_total(),
        commitments_generated: ops.commitments_generated,
        commitments_precomputed: ops.commitments_precomputed,
        commitments_verified: ops.commitments_verified,
    })
}

fn run(scenario: &Scenario, coords: (usize, usize, u32)) -> Result<RunLog, BenchError> {
    let (k, senders, iteration) = coords;
    coordinator_run(scenario).map_err(|source| BenchError::Sim {
        k,
        senders,
        iteration,
        source,
    })
}

fn dcnet_row(spec: &ExperimentSpec, coords: (usize, usize, u32)) -> Result<Row, BenchError> {
    let (k, senders, iteration) = coords;
    let s = scenario(
        spec,
        Protocol::Dc(spec.participant_config()),
        k,
        senders,
        run_seed(spec.seed, k, senders, iteration),
    );
    row_from_log(
        "dcnet",
        spec,
        spec.mode.to_string(),
        spec.opts.to_string(),
        coords,
        &run(&s, coords)?,
    )
}

fn baseline_row(spec: &ExperimentSpec, coords: (usize, usize, u32)) -> Result<Row, BenchError> {
    let (k, senders, iteration) = coords;
    // The fixed slot length is the experiment's message size.
    let protocol = Protocol::Baseline {
        fixed_len: spec.msg_size,
        config: spec.participant_config(),
    };
    let s = scenario(
        spec,
        protocol,
        k,
        senders,
        run_seed(spec.seed, k, senders, iteration),
    );
    row_from_log(
        "baseline",
        spec,
        "secured".into(),
        "none".into(),
        coords,
        &run(&s, coords)?,
    )
}

fn median_u64(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Min/median/max over the iteration rows of one series.
pub fn summarise(rows: &[Row]) -> Row {
    let first = rows.first().expect("series has at least one row");
    let mut t: Vec<f64> = rows.iter().map(|r| r.sim_runtime_ms).collect();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    let median = if n % 2 == 1 {
        t[n / 2]
    } else {
        (t[n / 2 - 1] + t[n / 2]) / 2.0
    };
    let col = |f: fn(&Row) -> u64| median_u64(rows.iter().map(f).collect());
    Row {
        iteration: None,
        sim_runtime_ms: median,
        min_runtime_ms: Some(t[0]),
        max_runtime_ms: Some(t[n - 1]),
        bytes_total: col(|r| r.bytes_total),
        commitments_generated: col(|r| r.commitments_generated),
        commitments_precomputed: col(|r| r.commitments_precomputed),
        commitments_verified: col(|r| r.commitments_verified),
        ..first.clone()
    }
}

/// Runs one (k, senders, iteration) point.
type RunOne = fn(&ExperimentSpec, (usize, usize, u32)) -> Result<Row, BenchError>;

fn series(
    spec: &ExperimentSpec,
    one: RunOne,
    k: usize,
    senders: usize,
) -> Result<Vec<Row>, BenchError> {
    let mut rows = (0..spec.iterations)
        .map(|i| one(spec, (k, senders, i)))
        .collect::<Result<Vec<_>, _>>()?;
    rows.push(summarise(&rows));
    Ok(rows)
}

/// One row per (k, senders, iteration) and a summary row closing each series.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>, BenchError> {
    spec.validate()?;
    let mut out = Vec::new();
    for &k in &spec.nodes {
        for &senders in &spec.senders {
            out.extend(series(spec, dcnet_row, k, senders)?);
        }
    }
    Ok(out)
}

/// Paired protocol and baseline series for every (k, senders). The baseline
/// runs with fixed slots of `msg_size` bytes and full verification.
pub fn compare_baseline(spec: &ExperimentSpec) -> Result<Vec<Row>, BenchError> {
    spec.validate()?;
    let mut out = Vec::new();
    for &k in &spec.nodes {
        for &senders in &spec.senders {
            out.extend(series(spec, dcnet_row, k, senders)?);
            out.extend(series(spec, baseline_row, k, senders)?);
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV fields are ASCII")
}
