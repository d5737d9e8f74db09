//! The fixed-length predecessor protocol used as a performance baseline: one
//! secured round over 2k slots of `(message, target group)`, each slot padded
//! to the fixed message length, then every member forwards each decoded
//! message to every member of its target group.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::blame::round_ids;
use crate::crypto::{blocks_for, embed_bytes, extract_bytes, Pedersen, Scalar, SealPublicKey};
use crate::dc::{commit_slices, split_payload, CommitmentMatrix, DcError, Payload, SliceMatrix};
use crate::envelope::{Body, Envelope};
use crate::node::{Input, Node, OpCounts, Output, RoundDriver};

/// Group id meaning "no target": the slot is empty.
pub const NO_GROUP: u16 = 0;
const GROUP_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("message of {len} bytes exceeds the fixed length {fixed}")]
    Oversize { len: usize, fixed: usize },
    #[error("a message needs a target group other than 0")]
    NoTarget,
    #[error(transparent)]
    Dc(#[from] DcError),
}

/// Contents of one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedSlot {
    /// Always exactly the fixed length; shorter messages are zero-padded.
    pub message: Vec<u8>,
    pub group: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaselineParams {
    pub k: usize,
    pub fixed_len: usize,
}

impl BaselineParams {
    pub fn slots(&self) -> usize {
        2 * self.k
    }

    pub fn blocks_per_slot(&self) -> usize {
        blocks_for(self.fixed_len + GROUP_LEN)
    }

    pub fn blocks(&self) -> usize {
        self.slots() * self.blocks_per_slot()
    }
}

#[derive(Clone, Debug)]
pub struct BaselinePreparation {
    pub slot: Option<usize>,
    pub payload: Payload,
    pub slices: SliceMatrix,
    pub commitments: CommitmentMatrix,
}

fn encode_slot(slot: &FixedSlot, params: &BaselineParams) -> Vec<Scalar> {
    let mut bytes = vec![0u8; params.fixed_len + GROUP_LEN];
    bytes[..slot.message.len()].copy_from_slice(&slot.message);
    bytes[params.fixed_len..].copy_from_slice(&slot.group.to_be_bytes());
    embed_bytes(&bytes)
}

/// A non-sender passes `None` and contributes zeros everywhere.
pub fn prepare_baseline<R: RngCore + CryptoRng>(
    message: Option<(&[u8], u16)>,
    params: &BaselineParams,
    pedersen: &Pedersen,
    rng: &mut R,
) -> Result<BaselinePreparation, BaselineError> {
    let per = params.blocks_per_slot();
    let mut blocks = vec![Scalar::ZERO; params.blocks()];
    let mut slot = None;
    if let Some((m, group)) = message {
        if m.len() > params.fixed_len {
            return Err(BaselineError::Oversize {
                len: m.len(),
                fixed: params.fixed_len,
            });
        }
        if group == NO_GROUP {
            return Err(BaselineError::NoTarget);
        }
        let s = rng.gen_range(0..params.slots());
        let enc = encode_slot(
            &FixedSlot {
                message: m.to_vec(),
                group,
            },
            params,
        );
        blocks[s * per..(s + 1) * per].copy_from_slice(&enc);
        slot = Some(s);
    }
    let payload = Payload::Blocks(blocks);
    let mut slices = split_payload(&payload, params.k, rng)?;
    slices.set_blindings(|_, _| Scalar::random(rng));
    let commitments = commit_slices(&slices, pedersen)?;
    Ok(BaselinePreparation {
        slot,
        payload,
        slices,
        commitments,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotValue {
    Empty,
    Occupied(FixedSlot),
    /// Collided or tampered.
    Malformed,
}

pub fn decode_baseline(x: &Payload, params: &BaselineParams) -> Vec<SlotValue> {
    let per = params.blocks_per_slot();
    let Some(blocks) = x.blocks().filter(|b| b.len() == params.blocks()) else {
        return vec![SlotValue::Malformed; params.slots()];
    };
    (0..params.slots())
        .map(|s| {
            let Ok(bytes) = extract_bytes(&blocks[s * per..(s + 1) * per]) else {
                return SlotValue::Malformed;
            };
            let group = u16::from_be_bytes([bytes[params.fixed_len], bytes[params.fixed_len + 1]]);
            let message = bytes[..params.fixed_len].to_vec();
            let tail_clean = bytes[params.fixed_len + GROUP_LEN..]
                .iter()
                .all(|b| *b == 0);
            match (group, tail_clean) {
                (_, false) => SlotValue::Malformed,
                (NO_GROUP, true) if message.iter().all(|b| *b == 0) => SlotValue::Empty,
                (NO_GROUP, true) => SlotValue::Malformed,
                (group, true) => SlotValue::Occupied(FixedSlot { message, group }),
            }
        })
        .collect()
}

/// One forwarding of a decoded message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unicast {
    pub slot: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransmitSchedule {
    pub unicasts: Vec<Unicast>,
    /// Group ids that named no known group.
    pub skipped: Vec<u16>,
}

/// Every member of the source group sends every occupied slot's message to
/// every member of its target group.
pub fn transmit_to_target(
    slots: &[SlotValue],
    source: &[usize],
    groups: &BTreeMap<u16, Vec<usize>>,
) -> TransmitSchedule {
    let mut schedule = TransmitSchedule::default();
    for (slot, v) in slots.iter().enumerate() {
        let SlotValue::Occupied(s) = v else { continue };
        let Some(target) = groups.get(&s.group) else {
            schedule.skipped.push(s.group);
            continue;
        };
        for from in source {
            for to in target {
                schedule.unicasts.push(Unicast {
                    slot,
                    from: *from,
                    to: *to,
                });
            }
        }
    }
    schedule
}

/// A baseline group member for the simulator. The group forwards to itself:
/// copies addressed to the sender itself stay local.
pub struct BaselineParticipant {
    id: usize,
    roster: Vec<usize>,
    params: BaselineParams,
    group: u16,
    pedersen: Pedersen,
    rng: ChaCha20Rng,
    outbox: VecDeque<Vec<u8>>,
    idle_interval_ms: u64,
    max_instances: Option<u64>,
    instance: u64,
    round: Option<RoundDriver>,
    /// Forwarded copies received per instance.
    received: BTreeMap<u64, usize>,
    expected: Option<usize>,
    buffered: BTreeMap<u32, Vec<Arc<Envelope>>>,
    ops: OpCounts,
}

impl BaselineParticipant {
    /// Members are ordered by sealing key as in the main protocol.
    pub fn new(
        id: usize,
        directory: &[(usize, SealPublicKey)],
        fixed_len: usize,
        pedersen: Pedersen,
        idle_interval_ms: u64,
        max_instances: Option<u64>,
        rng_seed: u64,
    ) -> Self {
        let mut sorted = directory.to_vec();
        sorted.sort_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.0.cmp(&b.0)));
        let roster: Vec<usize> = sorted.iter().map(|(i, _)| *i).collect();
        BaselineParticipant {
            id,
            params: BaselineParams {
                k: roster.len(),
                fixed_len,
            },
            roster,
            group: 1,
            pedersen,
            rng: ChaCha20Rng::seed_from_u64(rng_seed),
            outbox: VecDeque::new(),
            idle_interval_ms,
            max_instances,
            instance: 0,
            round: None,
            received: BTreeMap::new(),
            expected: None,
            buffered: BTreeMap::new(),
            ops: OpCounts::default(),
        }
    }

    pub fn params(&self) -> BaselineParams {
        self.params
    }

    fn log(&self, out: &mut Vec<Output>, event: &str) {
        out.push(Output::Log(format!(
            "round={} node={} phase=BASELINE mode=SECURED event={}",
            self.instance, self.id, event
        )));
    }

    fn start(&mut self, out: &mut Vec<Output>) {
        self.instance += 1;
        let instance = self.instance;
        out.push(Output::InstanceStarted { instance });
        self.log(out, "TIMER");
        let msg = self.outbox.front().cloned();
        let prep = prepare_baseline(
            msg.as_deref().map(|m| (m, self.group)),
            &self.params,
            &self.pedersen,
            &mut self.rng,
        )
        .expect("queued messages fit the fixed length");
        self.ops.commitments_generated += prep.commitments.len() as u64;
        let (round_id, _) = round_ids(instance);
        self.round = Some(RoundDriver::start(
            round_id,
            &self.roster,
            self.id,
            prep.slices,
            Some(prep.commitments),
            out,
        ));
        if let Some(envs) = self.buffered.remove(&round_id) {
            for e in envs {
                self.accept(&e);
            }
        }
        self.advance(out);
    }

    fn accept(&mut self, env: &Envelope) {
        let Some(from) = self.roster.iter().position(|m| *m == env.sender as usize) else {
            return;
        };
        if let Some(r) = self.round.as_mut() {
            r.accept(from, &env.body);
        }
    }

    fn advance(&mut self, out: &mut Vec<Output>) {
        let Some(r) = self.round.as_mut() else { return };
        if !r.progress(
            &self.roster,
            self.id,
            false,
            &self.pedersen,
            &mut self.ops,
            out,
        ) {
            return;
        }
        let r = self.round.take().expect("active round");
        let instance = self.instance;
        let slots = match &r.transcript.result {
            Some(x) => decode_baseline(&x.values, &self.params),
            None => vec![SlotValue::Malformed; self.params.slots()],
        };
        let groups = BTreeMap::from([(self.group, self.roster.clone())]);
        let schedule = transmit_to_target(&slots, &[self.id], &groups);
        for g in &schedule.skipped {
            self.log(out, &format!("UNKNOWN_GROUP:{g}"));
        }
        let (_, transmit_id) = round_ids(instance);
        for u in &schedule.unicasts {
            let SlotValue::Occupied(s) = &slots[u.slot] else {
                continue;
            };
            if u.to == self.id {
                out.push(Output::Delivered {
                    instance,
                    slot: u.slot,
                    bytes: s.message.clone(),
                });
            } else {
                let env = Envelope::new(transmit_id, self.id, Body::Transmit(s.message.clone()));
                out.push(Output::Send {
                    to: u.to,
                    envelope: Arc::new(env),
                });
            }
        }
        if let Some(own) = self.outbox.front() {
            let mut padded = own.clone();
            padded.resize(self.params.fixed_len, 0);
            let delivered = slots
                .iter()
                .any(|v| matches!(v, SlotValue::Occupied(s) if s.message == padded && s.group == self.group));
            if delivered {
                self.outbox.pop_front();
            }
        }
        let occupied = slots
            .iter()
            .filter(|v| matches!(v, SlotValue::Occupied(_)))
            .count();
        self.expected = Some(occupied * (self.roster.len() - 1));
        self.maybe_finish(out);
    }

    fn maybe_finish(&mut self, out: &mut Vec<Output>) {
        let Some(expected) = self.expected else {
            return;
        };
        if self.received.get(&self.instance).copied().unwrap_or(0) < expected {
            return;
        }
        self.expected = None;
        self.received.remove(&self.instance);
        out.push(Output::InstanceFinished {
            instance: self.instance,
            aborted: false,
        });
        self.log(out, "COMPLETE");
        if !self.max_instances.is_some_and(|m| self.instance >= m) {
            out.push(Output::ScheduleTimer {
                after_ms: self.idle_interval_ms,
            });
        }
    }
}

impl Node for BaselineParticipant {
    fn id(&self) -> usize {
        self.id
    }

    fn handle(&mut self, input: Input) -> Vec<Output> {
        let mut out = Vec::new();
        match input {
            Input::Setup => out.push(Output::Ready),
            Input::Submit(m) => self.outbox.push_back(m),
            Input::GroupReady => out.push(Output::ScheduleTimer {
                after_ms: self.idle_interval_ms,
            }),
            Input::Timer => self.start(&mut out),
            Input::Precompute => {}
            Input::Receive(env) => {
                if let Body::Transmit(_) = env.body {
                    let instance = u64::from(env.round_id / 2);
                    *self.received.entry(instance).or_default() += 1;
                    if instance == self.instance {
                        self.maybe_finish(&mut out);
                    }
                } else if self
                    .round
                    .as_ref()
                    .is_some_and(|r| r.round_id == env.round_id)
                {
                    self.accept(&env);
                    self.advance(&mut out);
                } else if env.round_id > round_ids(self.instance).0 {
                    self.buffered.entry(env.round_id).or_default().push(env);
                }
            }
        }
        out
    }

    fn ops(&self) -> OpCounts {
        self.ops
    }

    fn busy(&self) -> bool {
        self.round.is_some() || self.expected.is_some()
    }

    fn describe(&self) -> String {
        let round = self
            .round
            .as_ref()
            .map_or("none".to_string(), |r| r.progress_line());
        format!(
            "node={} baseline instance={} active=[{}] expected={:?} received={:?}",
            self.id, self.instance, round, self.expected, self.received
        )
    }
}
