//! Single-threaded discrete-event simulation of a group of participants.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt::Write as _;

use dcnet_core::baseline::BaselineParticipant;
use dcnet_core::crypto::{Pedersen, SealKeyPair};
use dcnet_core::envelope::Envelope;
use dcnet_core::node::{Behaviour, Input, Node, OpCounts, Output, Participant, ParticipantConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cost::CostModel;
use crate::net::{Interface, NetConfig, NS_PER_MS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("deadlock at t={time_ns}ns:\n{}", dump.join("\n"))]
    Deadlock { time_ns: u64, dump: Vec<String> },
    #[error("node {from} sent to unknown or excluded node {to}")]
    Routing { from: usize, to: usize },
    #[error("simulated time limit of {limit_ms} ms exceeded")]
    TimeLimit { limit_ms: u64 },
    #[error("envelope from node {from} does not survive encoding: {reason}")]
    Encoding { from: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Protocol {
    /// The two-round arbitrary-length protocol.
    Dc(ParticipantConfig),
    /// The fixed-length baseline with slots of `fixed_len` bytes.
    Baseline {
        fixed_len: usize,
        config: ParticipantConfig,
    },
}

impl Protocol {
    pub fn config(&self) -> &ParticipantConfig {
        match self {
            Protocol::Dc(c) | Protocol::Baseline { config: c, .. } => c,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub k: usize,
    pub net: NetConfig,
    pub cost: CostModel,
    pub protocol: Protocol,
    /// Messages queued at each node before the group starts.
    pub messages: BTreeMap<usize, Vec<Vec<u8>>>,
    /// Deviating nodes; everyone else is honest.
    pub behaviours: BTreeMap<usize, Behaviour>,
    pub time_limit_ms: u64,
    /// Encode and decode every envelope and compare with its declared size.
    pub check_encoding: bool,
}

impl Scenario {
    pub fn new(k: usize, protocol: Protocol) -> Self {
        Scenario {
            k,
            net: NetConfig::default(),
            cost: CostModel::default(),
            protocol,
            messages: BTreeMap::new(),
            behaviours: BTreeMap::new(),
            time_limit_ms: 24 * 3600 * 1000,
            check_encoding: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeReport {
    pub id: usize,
    pub bytes_sent: u64,
    pub envelopes_sent: u64,
    pub bytes_received: u64,
    pub ops: OpCounts,
    /// (instance, slot, message) in delivery order.
    pub delivered: Vec<(u64, usize, Vec<u8>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceTiming {
    /// Earliest start over all nodes.
    pub start_ns: u64,
    /// Latest finish over all nodes.
    pub end_ns: u64,
    pub started: usize,
    pub finished: usize,
    pub aborted: bool,
}

impl InstanceTiming {
    pub fn runtime_ms(&self) -> f64 {
        (self.end_ns - self.start_ns) as f64 / NS_PER_MS as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunLog {
    /// `t=<ns> <record>` lines in causal order.
    pub lines: Vec<String>,
    pub nodes: Vec<NodeReport>,
    pub instances: BTreeMap<u64, InstanceTiming>,
    /// When every node had finished setup and the group was released.
    pub barrier_ns: u64,
    pub end_ns: u64,
}

impl RunLog {
    pub fn bytes_total(&self) -> u64 {
        self.nodes.iter().map(|n| n.bytes_sent).sum()
    }

    pub fn ops_total(&self) -> OpCounts {
        self.nodes.iter().fold(OpCounts::default(), |mut a, n| {
            a.commitments_generated += n.ops.commitments_generated;
            a.commitments_precomputed += n.ops.commitments_precomputed;
            a.commitments_verified += n.ops.commitments_verified;
            a.point_additions += n.ops.point_additions;
            a
        })
    }

    pub fn runtime_ms(&self, instance: u64) -> Option<f64> {
        self.instances
            .get(&instance)
            .filter(|t| t.finished > 0)
            .map(InstanceTiming::runtime_ms)
    }

    /// Lines whose record (after the timestamp) contains `pattern`.
    pub fn grep<'a>(&'a self, pattern: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.lines.iter().filter(move |l| l.contains(pattern))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    /// `node,bytes_sent,envelopes_sent,generated,precomputed,verified,point_additions`
    pub fn counters_csv(&self) -> String {
        let mut s = String::from(
            "node,bytes_sent,envelopes_sent,commitments_generated,commitments_precomputed,commitments_verified,point_additions\n",
        );
        for n in &self.nodes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                n.id,
                n.bytes_sent,
                n.envelopes_sent,
                n.ops.commitments_generated,
                n.ops.commitments_precomputed,
                n.ops.commitments_verified,
                n.ops.point_additions
            );
        }
        s
    }
}

/// 64-bit FNV-1a, enough to tell delivered messages apart in logs.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

struct Scheduled {
    time: u64,
    seq: u64,
    node: usize,
    input: Option<Input>,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Min-heap on (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

pub struct Simulator {
    nodes: Vec<Box<dyn Node>>,
    net: NetConfig,
    cost: CostModel,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now: u64,
    busy_until: Vec<u64>,
    /// Inputs that arrived while the node was computing.
    backlog: Vec<VecDeque<Input>>,
    wake_pending: Vec<bool>,
    interfaces: Vec<Interface>,
    ready: usize,
    log: RunLog,
    check_encoding: bool,
    time_limit_ns: u64,
}

impl Simulator {
    pub fn new(nodes: Vec<Box<dyn Node>>, net: NetConfig, cost: CostModel) -> Self {
        let n = nodes.len();
        let reports = nodes
            .iter()
            .map(|node| NodeReport {
                id: node.id(),
                ..Default::default()
            })
            .collect();
        Simulator {
            nodes,
            net,
            cost,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            busy_until: vec![0; n],
            backlog: vec![VecDeque::new(); n],
            wake_pending: vec![false; n],
            interfaces: vec![Interface::default(); n],
            ready: 0,
            log: RunLog {
                nodes: reports,
                ..Default::default()
            },
            check_encoding: false,
            time_limit_ns: u64::MAX,
        }
    }

    fn index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id() == id)
    }

    fn push(&mut self, time: u64, node: usize, input: Option<Input>) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            node,
            input,
        });
    }

    /// Queues an input for node index `node` at simulated time `time`.
    pub fn schedule(&mut self, time: u64, node: usize, input: Input) {
        self.push(time, node, Some(input));
    }

    fn record(&mut self, time: u64, line: String) {
        self.log.lines.push(format!("t={time} {line}"));
    }

    fn run_one(&mut self, idx: usize, input: Input) -> Result<(), SimError> {
        let start = self.now.max(self.busy_until[idx]);
        let before = self.nodes[idx].ops();
        let outputs = self.nodes[idx].handle(input);
        let after = self.nodes[idx].ops();
        let finish = start + self.cost.charge(&after.since(&before));
        self.busy_until[idx] = finish;
        self.log.nodes[idx].ops = after;
        let from = self.nodes[idx].id();
        for o in outputs {
            match o {
                Output::Send { to, envelope } => {
                    let target = self.index(to).ok_or(SimError::Routing { from, to })?;
                    if target == idx {
                        return Err(SimError::Routing { from, to });
                    }
                    let bytes = envelope.wire_len();
                    if self.check_encoding {
                        check_envelope(from, &envelope, bytes)?;
                    }
                    let arrival = self.interfaces[idx].deliver(
                        finish,
                        bytes,
                        self.net.latency(from, to),
                        &self.net,
                    );
                    self.log.nodes[idx].bytes_sent += bytes as u64;
                    self.log.nodes[idx].envelopes_sent += 1;
                    self.log.nodes[target].bytes_received += bytes as u64;
                    self.push(arrival, target, Some(Input::Receive(envelope)));
                }
                Output::ScheduleTimer { after_ms } => {
                    self.push(finish + after_ms * NS_PER_MS, idx, Some(Input::Timer))
                }
                Output::RequestPrecompute => self.push(finish, idx, Some(Input::Precompute)),
                Output::Ready => {
                    self.ready += 1;
                    self.log.barrier_ns = self.log.barrier_ns.max(finish);
                    if self.ready == self.nodes.len() {
                        let barrier = self.log.barrier_ns;
                        self.record(barrier, "event=BARRIER".to_string());
                        for n in 0..self.nodes.len() {
                            self.push(barrier, n, Some(Input::GroupReady));
                        }
                    }
                }
                Output::InstanceStarted { instance } => {
                    let t = self
                        .log
                        .instances
                        .entry(instance)
                        .or_insert(InstanceTiming {
                            start_ns: start,
                            end_ns: start,
                            started: 0,
                            finished: 0,
                            aborted: false,
                        });
                    t.start_ns = t.start_ns.min(start);
                    t.started += 1;
                }
                Output::InstanceFinished { instance, aborted } => {
                    if let Some(t) = self.log.instances.get_mut(&instance) {
                        t.end_ns = t.end_ns.max(finish);
                        t.finished += 1;
                        t.aborted |= aborted;
                    }
                }
                Output::Delivered {
                    instance,
                    slot,
                    bytes,
                } => {
                    let line = format!(
                        "round={instance} node={from} event=DELIVER slot={slot} len={} fnv={:016x}",
                        bytes.len(),
                        fnv1a(&bytes)
                    );
                    self.record(finish, line);
                    self.log.nodes[idx].delivered.push((instance, slot, bytes));
                }
                Output::Log(line) => self.record(finish, line),
            }
        }
        Ok(())
    }

    /// Handles backlog entries of `idx` until it is busy past now.
    fn drain(&mut self, idx: usize) -> Result<(), SimError> {
        while self.busy_until[idx] <= self.now {
            let Some(input) = self.backlog[idx].pop_front() else {
                return Ok(());
            };
            self.run_one(idx, input)?;
        }
        if !self.backlog[idx].is_empty() && !self.wake_pending[idx] {
            self.wake_pending[idx] = true;
            let at = self.busy_until[idx];
            self.push(at, idx, None);
        }
        Ok(())
    }

    /// Runs until no events remain.
    pub fn run(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.time_limit_ns {
                return Err(SimError::TimeLimit {
                    limit_ms: self.time_limit_ns / NS_PER_MS,
                });
            }
            self.now = ev.time;
            match ev.input {
                Some(input) => self.backlog[ev.node].push_back(input),
                None => self.wake_pending[ev.node] = false,
            }
            self.drain(ev.node)?;
        }
        self.log.end_ns = self
            .now
            .max(self.busy_until.iter().copied().max().unwrap_or(0));
        let stuck: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.busy())
            .map(|n| n.describe())
            .collect();
        if !stuck.is_empty() {
            let dump = self.nodes.iter().map(|n| n.describe()).collect();
            return Err(SimError::Deadlock {
                time_ns: self.now,
                dump,
            });
        }
        Ok(())
    }

    pub fn into_log(self) -> RunLog {
        self.log
    }
}

fn check_envelope(from: usize, e: &Envelope, declared: usize) -> Result<(), SimError> {
    let enc = e.encode();
    if enc.len() != declared {
        return Err(SimError::Encoding {
            from,
            reason: format!("{} bytes, declared {declared}", enc.len()),
        });
    }
    match Envelope::decode(&enc) {
        Ok(d) if d == *e => Ok(()),
        Ok(_) => Err(SimError::Encoding {
            from,
            reason: "decodes to a different envelope".into(),
        }),
        Err(err) => Err(SimError::Encoding {
            from,
            reason: err.to_string(),
        }),
    }
}

/// Builds the nodes of a scenario with keys and RNG seeds derived from
/// `net.seed`, then runs setup, the start barrier and all instances.
pub fn coordinator_run(scenario: &Scenario) -> Result<RunLog, SimError> {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.net.seed);
    let keys: Vec<SealKeyPair> = (0..scenario.k)
        .map(|_| SealKeyPair::generate(&mut rng))
        .collect();
    let directory: Vec<(usize, _)> = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (i, k.public()))
        .collect();
    let mut nodes: Vec<Box<dyn Node>> = Vec::with_capacity(scenario.k);
    for (i, key) in keys.into_iter().enumerate() {
        let seed = rng.next_u64();
        let node: Box<dyn Node> = match &scenario.protocol {
            Protocol::Dc(config) => {
                let mut c = *config;
                c.behaviour = scenario.behaviours.get(&i).copied().unwrap_or_default();
                Box::new(Participant::new(i, key, &directory, c, seed))
            }
            Protocol::Baseline { fixed_len, config } => Box::new(BaselineParticipant::new(
                i,
                &directory,
                *fixed_len,
                Pedersen::new(config.backend),
                config.idle_interval_ms,
                config.max_instances,
                seed,
            )),
        };
        nodes.push(node);
    }
    let mut sim = Simulator::new(nodes, scenario.net.clone(), scenario.cost);
    sim.check_encoding = scenario.check_encoding;
    sim.time_limit_ns = scenario.time_limit_ms.saturating_mul(NS_PER_MS);
    for i in 0..scenario.k {
        for m in scenario.messages.get(&i).into_iter().flatten() {
            sim.schedule(0, i, Input::Submit(m.clone()));
        }
        sim.schedule(0, i, Input::Setup);
    }
    sim.run()?;
    Ok(sim.into_log())
}
