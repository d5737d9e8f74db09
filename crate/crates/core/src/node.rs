//! A participant as an event-driven machine over envelopes. Nothing here does
//! I/O or reads a clock: the caller feeds [`Input`]s and carries out the
//! returned [`Output`]s, which is how the simulator drives it.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::blame::{
    round_ids, validate_blame, verify_zero_commitments, AdjudicationContext, BlameMessage,
};
use crate::crypto::{GroupBackend, Pedersen, Scalar, SealKeyPair, SealPublicKey, SealedSeed};
use crate::dc::{
    aggregate_received, check_shares, combine_broadcasts, verify_round_scoped, Aggregate,
    ArithmeticMode, CommitmentMatrix, Payload, RoundTranscript, SliceMatrix, TranscriptStore,
    VerificationReport, VerifyScope, DEFAULT_RETENTION,
};
use crate::envelope::{Body, Envelope};
use crate::fault::{inject_fault, FaultKind};
use crate::final_round::{
    compute_layout, detect_collision, extract_messages, prepare_final, FinalError, Layout,
    LayoutEntry, OwnReservation,
};
use crate::init::{
    decode_initial_result, prepare_initial, validate_announcements, Indicator, InitParams,
    InitialEntry, InitialPreparation, OwnAnnouncement, SecurityMode, SlotChoice, SlotContent,
};
use crate::state::{Action, Event, ModePolicy, NodeState, PendingBlame, Phase, RoundSummary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Optimisations {
    /// Skip the pairwise share checks unless a broadcast check fails.
    pub deferred: bool,
    /// Prepare the next initial round while idle.
    pub precompute: bool,
    /// Send short messages inside the initial-round slot.
    pub direct: bool,
}

impl Optimisations {
    pub const NONE: Optimisations = Optimisations {
        deferred: false,
        precompute: false,
        direct: false,
    };
    pub const ALL: Optimisations = Optimisations {
        deferred: true,
        precompute: true,
        direct: true,
    };
}

impl fmt::Display for Optimisations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.deferred, "deferred"),
            (self.precompute, "precompute"),
            (self.direct, "direct"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

impl FromStr for Optimisations {
    type Err = String;

    /// Accepts `none` or names joined by `+` or `,`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut o = Optimisations::NONE;
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "none" => {}
                "all" => o = Optimisations::ALL,
                "deferred" | "deferred-validation" => o.deferred = true,
                "precompute" | "precomputed-commitments" => o.precompute = true,
                "direct" | "direct-transmission" => o.direct = true,
                other => return Err(format!("unknown optimisation `{other}`")),
            }
        }
        Ok(o)
    }
}

/// How a participant deviates from the protocol, for tests and scenarios.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Behaviour {
    /// In unsecured instances, fill k+1 slots.
    pub over_occupy: bool,
    /// Tamper with the first foreign reservation of every final round.
    pub corrupt: Option<FaultKind>,
}

impl Behaviour {
    pub const HONEST: Behaviour = Behaviour {
        over_occupy: false,
        corrupt: None,
    };

    pub fn is_honest(&self) -> bool {
        *self == Behaviour::HONEST
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParticipantConfig {
    pub policy: ModePolicy,
    pub opts: Optimisations,
    /// Senders take slot `2 · roster position`. Evaluation only: it reveals
    /// who sent what.
    pub fixed_slots: bool,
    pub length_cap: u16,
    pub retention: usize,
    pub idle_interval_ms: u64,
    /// Stop scheduling instances after this many.
    pub max_instances: Option<u64>,
    pub backend: GroupBackend,
    pub behaviour: Behaviour,
}

impl Default for ParticipantConfig {
    fn default() -> Self {
        ParticipantConfig {
            policy: ModePolicy::Auto,
            opts: Optimisations::NONE,
            fixed_slots: false,
            length_cap: u16::MAX,
            retention: DEFAULT_RETENTION,
            idle_interval_ms: 1000,
            max_instances: None,
            backend: GroupBackend::Secp256k1,
            behaviour: Behaviour::HONEST,
        }
    }
}

/// Expensive group operations performed so far.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Commitments computed while a round was running.
    pub commitments_generated: u64,
    /// Commitments computed ahead of time while idle.
    pub commitments_precomputed: u64,
    pub commitments_verified: u64,
    /// Point additions outside commitment computations.
    pub point_additions: u64,
}

impl OpCounts {
    pub fn since(&self, earlier: &OpCounts) -> OpCounts {
        OpCounts {
            commitments_generated: self.commitments_generated - earlier.commitments_generated,
            commitments_precomputed: self.commitments_precomputed - earlier.commitments_precomputed,
            commitments_verified: self.commitments_verified - earlier.commitments_verified,
            point_additions: self.point_additions - earlier.point_additions,
        }
    }

    fn count(&mut self, report: &VerificationReport) {
        self.commitments_verified += report.commitments_evaluated;
        self.point_additions += report.point_additions;
    }
}

#[derive(Clone, Debug)]
pub enum Input {
    /// Before the group starts; precomputation may run here.
    Setup,
    GroupReady,
    Timer,
    /// Idle time is available for precomputation.
    Precompute,
    Receive(Arc<Envelope>),
    /// Queue a message for anonymous broadcast.
    Submit(Vec<u8>),
}

#[derive(Clone, Debug)]
pub enum Output {
    Send {
        to: usize,
        envelope: Arc<Envelope>,
    },
    ScheduleTimer {
        after_ms: u64,
    },
    /// Deliver [`Input::Precompute`] once this step's work is done.
    RequestPrecompute,
    /// Setup finished.
    Ready,
    InstanceStarted {
        instance: u64,
    },
    InstanceFinished {
        instance: u64,
        aborted: bool,
    },
    Delivered {
        instance: u64,
        slot: usize,
        bytes: Vec<u8>,
    },
    Log(String),
}

/// What a transport or simulator needs from a participant.
pub trait Node {
    fn id(&self) -> usize;
    fn handle(&mut self, input: Input) -> Vec<Output>;
    fn ops(&self) -> OpCounts;
    /// In the middle of an instance.
    fn busy(&self) -> bool;
    /// One line for deadlock diagnostics.
    fn describe(&self) -> String;
}

fn position(roster: &[usize], id: usize) -> Option<usize> {
    roster.iter().position(|m| *m == id)
}

/// One DC round in progress: shares and commitments out, aggregates back.
#[derive(Debug)]
pub(crate) struct RoundDriver {
    pub round_id: u32,
    pub transcript: RoundTranscript,
    pub secured: bool,
    /// A check failed or the result could not be formed.
    pub garbage: bool,
    aggregate_sent: bool,
    done: bool,
}

impl RoundDriver {
    pub fn start(
        round_id: u32,
        roster: &[usize],
        self_id: usize,
        slices: SliceMatrix,
        commitments: Option<CommitmentMatrix>,
        out: &mut Vec<Output>,
    ) -> Self {
        let me = position(roster, self_id).expect("member of the roster");
        let mut t = RoundTranscript::new(round_id, me, slices);
        let secured = t.mode() == ArithmeticMode::ModQBlocks;
        let peers = || roster.iter().enumerate().filter(move |(j, _)| *j != me);
        if let Some(c) = commitments {
            let c = Arc::new(c);
            t.commitments.insert(me, c.clone());
            let env = Arc::new(Envelope::new(round_id, self_id, Body::Commitments(c)));
            for (_, peer) in peers() {
                out.push(Output::Send {
                    to: *peer,
                    envelope: env.clone(),
                });
            }
        }
        for (j, peer) in peers() {
            let env = Envelope::new(round_id, self_id, Body::Shares(t.own.row(j)));
            out.push(Output::Send {
                to: *peer,
                envelope: Arc::new(env),
            });
        }
        RoundDriver {
            round_id,
            transcript: t,
            secured,
            garbage: false,
            aggregate_sent: false,
            done: false,
        }
    }

    pub fn accept(&mut self, from: usize, body: &Body) {
        let t = &mut self.transcript;
        if from == t.self_index || from >= t.k {
            return;
        }
        match body {
            Body::Commitments(c) => {
                t.commitments.entry(from).or_insert_with(|| c.clone());
            }
            Body::Shares(row) => {
                t.received.entry(from).or_insert_with(|| row.clone());
            }
            Body::Aggregate(a) => {
                t.aggregates.entry(from).or_insert_with(|| a.clone());
            }
            Body::Control(_) | Body::Transmit(_) => {}
        }
    }

    /// Advances the round as far as the data allows. True once the result is
    /// formed (or known to be unusable).
    pub fn progress(
        &mut self,
        roster: &[usize],
        self_id: usize,
        deferred: bool,
        pedersen: &Pedersen,
        ops: &mut OpCounts,
        out: &mut Vec<Output>,
    ) -> bool {
        if self.done {
            return true;
        }
        let t = &mut self.transcript;
        let me = t.self_index;
        if !self.aggregate_sent && t.has_all_shares() && (!self.secured || t.has_all_commitments())
        {
            if self.secured && !deferred {
                match check_shares(t, pedersen) {
                    Ok(r) => {
                        ops.count(&r);
                        self.garbage |= !r.passed();
                    }
                    Err(_) => self.garbage = true,
                }
            }
            let agg = aggregate_received(t.k, &t.rows_for_aggregate()).unwrap_or_else(|_| {
                self.garbage = true;
                let blindings = if self.secured {
                    vec![Scalar::ZERO; t.blocks()]
                } else {
                    Vec::new()
                };
                Aggregate {
                    values: Payload::zero(t.mode(), t.blocks()),
                    blindings,
                }
            });
            t.aggregates.insert(me, agg.clone());
            let env = Arc::new(Envelope::new(self.round_id, self_id, Body::Aggregate(agg)));
            for (j, peer) in roster.iter().enumerate() {
                if j != me {
                    out.push(Output::Send {
                        to: *peer,
                        envelope: env.clone(),
                    });
                }
            }
            self.aggregate_sent = true;
        }
        if self.aggregate_sent && t.has_all_aggregates() {
            if self.secured {
                match verify_round_scoped(t, pedersen, VerifyScope::BROADCAST) {
                    Ok(r) => {
                        ops.count(&r);
                        if !r.passed() {
                            self.garbage = true;
                            if deferred {
                                // Now it is worth localising the culprit.
                                if let Ok(r) = check_shares(t, pedersen) {
                                    ops.count(&r);
                                }
                            }
                        }
                    }
                    Err(_) => self.garbage = true,
                }
            }
            match combine_broadcasts(t.k, &t.aggregates) {
                Ok(r) => t.result = Some(r),
                Err(_) => self.garbage = true,
            }
            self.done = true;
        }
        self.done
    }

    pub fn progress_line(&self) -> String {
        let t = &self.transcript;
        format!(
            "round_id={} shares={}/{} commitments={}/{} aggregates={}/{}",
            self.round_id,
            t.received.len() + 1,
            t.k,
            t.commitments.len(),
            if self.secured { t.k } else { 0 },
            t.aggregates.len(),
            t.k
        )
    }
}

#[derive(Debug)]
enum RoundContext {
    Initial {
        params: InitParams,
        /// Set when we announced a length.
        announcement: Option<OwnAnnouncement>,
        sealed: Option<Vec<SealedSeed>>,
        /// Own direct message and its slot.
        direct: Option<(usize, Vec<u8>)>,
    },
    Final {
        layout: Layout,
        own: Option<(LayoutEntry, OwnAnnouncement)>,
    },
}

#[derive(Debug)]
struct ActiveRound {
    instance: u64,
    driver: RoundDriver,
    context: RoundContext,
}

/// Decoded initial round kept for the final round of the same instance.
#[derive(Debug)]
struct InitialOutcome {
    instance: u64,
    slots: Vec<SlotContent>,
    /// Our announcement, if it survived intact.
    announcement: Option<OwnAnnouncement>,
}

#[derive(Debug)]
struct Prepared {
    instance: u64,
    mode: SecurityMode,
    k: usize,
    prep: InitialPreparation,
    direct: Option<(usize, Vec<u8>)>,
}

pub struct Participant {
    id: usize,
    keys: SealKeyPair,
    directory: BTreeMap<usize, SealPublicKey>,
    config: ParticipantConfig,
    pedersen: Pedersen,
    state: NodeState,
    rng: ChaCha20Rng,
    outbox: VecDeque<Vec<u8>>,
    pending_report: bool,
    store: TranscriptStore,
    round: Option<ActiveRound>,
    buffered: BTreeMap<u32, Vec<Arc<Envelope>>>,
    initial: Option<InitialOutcome>,
    prepared: Option<Prepared>,
    ops: OpCounts,
    dormant: bool,
}

impl Participant {
    /// `directory` lists every member's id and sealing key; the roster is
    /// ordered by key bytes so all members agree on positions.
    pub fn new(
        id: usize,
        keys: SealKeyPair,
        directory: &[(usize, SealPublicKey)],
        config: ParticipantConfig,
        rng_seed: u64,
    ) -> Self {
        let mut sorted = directory.to_vec();
        sorted.sort_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.0.cmp(&b.0)));
        let roster: Vec<usize> = sorted.iter().map(|(i, _)| *i).collect();
        assert!(
            roster.contains(&id),
            "participant {id} missing from its own directory"
        );
        Participant {
            id,
            keys,
            directory: directory.iter().copied().collect(),
            config,
            pedersen: Pedersen::new(config.backend),
            state: NodeState::new(id, roster, config.policy),
            rng: ChaCha20Rng::seed_from_u64(rng_seed),
            outbox: VecDeque::new(),
            pending_report: false,
            store: TranscriptStore::new(config.retention),
            round: None,
            buffered: BTreeMap::new(),
            initial: None,
            prepared: None,
            ops: OpCounts::default(),
            dormant: false,
        }
    }

    pub fn state(&self) -> &NodeState {
        &self.state
    }

    pub fn outbox_len(&self) -> usize {
        self.outbox.len()
    }

    pub fn store(&self) -> &TranscriptStore {
        &self.store
    }

    /// Excluded from the group; ignores all further input.
    pub fn is_dormant(&self) -> bool {
        self.dormant
    }

    fn me(&self) -> usize {
        position(&self.state.roster, self.id).expect("member of the roster")
    }

    fn roster_keys(&self) -> Vec<SealPublicKey> {
        self.state
            .roster
            .iter()
            .map(|m| self.directory[m])
            .collect()
    }

    fn params(&self, mode: SecurityMode) -> InitParams {
        InitParams::new(self.state.k(), mode).with_length_cap(self.config.length_cap)
    }

    fn log(&self, out: &mut Vec<Output>, event: &str) {
        out.push(Output::Log(self.state.log_line(event)));
    }

    fn step(&mut self, event: Event, out: &mut Vec<Output>) {
        let actions = match self.state.step(event) {
            Ok(a) => a,
            Err(e) => panic!("node {}: protocol logic fault: {e}", self.id),
        };
        self.apply(actions, out);
    }

    fn apply(&mut self, actions: Vec<Action>, out: &mut Vec<Output>) {
        for action in actions {
            match action {
                Action::Log(line) => out.push(Output::Log(line)),
                Action::ScheduleTimer => {
                    if self.dormant
                        || self
                            .config
                            .max_instances
                            .is_some_and(|m| self.state.instance >= m)
                    {
                        continue;
                    }
                    out.push(Output::ScheduleTimer {
                        after_ms: self.config.idle_interval_ms,
                    });
                    if self.config.opts.precompute {
                        out.push(Output::RequestPrecompute);
                    }
                }
                Action::StartInitialRound { instance, mode } => {
                    out.push(Output::InstanceStarted { instance });
                    self.start_initial(instance, mode, out);
                }
                Action::StartFinalRound { instance, mode } => self.start_final(instance, mode, out),
                Action::AbortInstance { instance } => {
                    self.initial = None;
                    out.push(Output::InstanceFinished {
                        instance,
                        aborted: true,
                    });
                }
                Action::CompleteInstance { instance } => out.push(Output::InstanceFinished {
                    instance,
                    aborted: false,
                }),
                Action::Exclude { member } => {
                    let excluded_round_ids: Vec<u32> = self.buffered.keys().copied().collect();
                    for r in excluded_round_ids {
                        if let Some(v) = self.buffered.get_mut(&r) {
                            v.retain(|e| e.sender as usize != member);
                        }
                    }
                    if member == self.id {
                        self.dormant = true;
                        self.buffered.clear();
                        self.log(out, "EXCLUDED");
                    }
                }
                Action::ReinitGroup { .. } => {
                    self.store.clear();
                    self.prepared = None;
                    self.initial = None;
                    if !self.dormant {
                        self.step(Event::GroupReady, out);
                    }
                }
            }
        }
    }

    /// Initial-round entries for instance `instance`; takes queued blames and reports.
    fn initial_entries(
        &mut self,
        instance: u64,
        params: &InitParams,
    ) -> (Vec<InitialEntry>, SlotChoice) {
        let mut entries = Vec::new();
        if let Some(m) = self.outbox.front() {
            if self.config.opts.direct && m.len() <= params.slot_capacity() {
                entries.push(InitialEntry::Direct(m.clone()));
            } else {
                entries.push(InitialEntry::Message { length: m.len() });
            }
        }
        if params.mode == SecurityMode::Secured {
            while let Some(b) = self.state.pending_blames.pop_front() {
                if let Some(msg) = b.message(instance) {
                    entries.push(InitialEntry::Blame(msg.encode()));
                }
            }
        } else {
            self.state.pending_blames.clear();
        }
        if std::mem::take(&mut self.pending_report) && params.mode == SecurityMode::Unsecured {
            entries.push(InitialEntry::Report);
        }
        if self.config.behaviour.over_occupy && params.mode == SecurityMode::Unsecured {
            let room = params.slots() - entries.len();
            entries.extend((0..(params.k + 1).min(room)).map(|_| InitialEntry::Direct(Vec::new())));
        }
        let choice = if self.config.fixed_slots {
            SlotChoice::Fixed(2 * self.me())
        } else {
            SlotChoice::Random
        };
        (entries, choice)
    }

    fn prepare(&mut self, instance: u64, mode: SecurityMode) -> Prepared {
        let params = self.params(mode);
        let (entries, choice) = self.initial_entries(instance, &params);
        let keys = self.roster_keys();
        let prep = prepare_initial(
            &entries,
            choice,
            &params,
            &keys,
            Some(&self.pedersen),
            &mut self.rng,
        )
        .expect("initial entries fit their slots");
        let direct = prep.occupied.iter().find_map(|(slot, c)| match c {
            SlotContent::Direct(b) if !b.is_empty() => Some((*slot, b.clone())),
            _ => None,
        });
        Prepared {
            instance,
            mode,
            k: params.k,
            prep,
            direct,
        }
    }

    fn commitment_count(prep: &InitialPreparation) -> u64 {
        prep.commitments.as_ref().map_or(0, |c| c.len() as u64)
    }

    fn precompute(&mut self) {
        if !self.config.opts.precompute || self.prepared.is_some() || self.dormant {
            return;
        }
        if !matches!(self.state.phase, Phase::Idle | Phase::GroupInit) {
            return;
        }
        let p = self.prepare(self.state.instance + 1, self.state.mode);
        self.ops.commitments_precomputed += Self::commitment_count(&p.prep);
        self.prepared = Some(p);
    }

    fn start_initial(&mut self, instance: u64, mode: SecurityMode, out: &mut Vec<Output>) {
        let k = self.state.k();
        let p = match self.prepared.take() {
            Some(p) if p.instance == instance && p.mode == mode && p.k == k => p,
            _ => {
                let p = self.prepare(instance, mode);
                self.ops.commitments_generated += Self::commitment_count(&p.prep);
                p
            }
        };
        let params = self.params(mode);
        let sealed = p.prep.occupied.iter().find_map(|(_, c)| match c {
            SlotContent::Announcement(a) if mode == SecurityMode::Secured => Some(a.seeds.clone()),
            _ => None,
        });
        let (round_id, _) = round_ids(instance);
        let driver = RoundDriver::start(
            round_id,
            &self.state.roster,
            self.id,
            p.prep.slices,
            p.prep.commitments,
            out,
        );
        let context = RoundContext::Initial {
            params,
            announcement: p.prep.announcement,
            sealed,
            direct: p.direct,
        };
        self.round = Some(ActiveRound {
            instance,
            driver,
            context,
        });
        self.drain_buffer(round_id, out);
    }

    fn start_final(&mut self, instance: u64, mode: SecurityMode, out: &mut Vec<Output>) {
        let outcome = self.initial.take().filter(|o| o.instance == instance);
        let outcome = outcome.expect("final round needs this instance's decoded initial round");
        let layout = compute_layout(&outcome.slots, self.config.length_cap)
            .expect("state machine saw a length");
        let k = self.state.k();
        let me = self.me();
        let mut seeds = BTreeMap::new();
        if mode == SecurityMode::Secured {
            let own_slot = outcome.announcement.as_ref().map(|a| a.slot);
            for (slot, s) in outcome.slots.iter().enumerate() {
                if let (SlotContent::Announcement(a), false) = (s, Some(slot) == own_slot) {
                    if let Some(Ok(seed)) = a.seeds.get(me).map(|c| self.keys.open(c)) {
                        seeds.insert(slot, seed);
                    }
                }
            }
        }
        let message = self.outbox.front().cloned();
        let own = outcome
            .announcement
            .as_ref()
            .zip(message.as_deref())
            .map(|(a, m)| OwnReservation {
                slot: a.slot,
                r: a.r,
                length: a.length,
                message: m,
            });
        let mut prep = match prepare_final(
            own,
            &layout,
            &seeds,
            k,
            mode,
            Some(&self.pedersen),
            &mut self.rng,
        ) {
            Ok(p) => p,
            // Our announcement did not make it into the layout; send nothing of our own.
            Err(FinalError::OwnAnnouncementLost { .. })
            | Err(FinalError::LengthMismatch { .. }) => prepare_final(
                None,
                &layout,
                &seeds,
                k,
                mode,
                Some(&self.pedersen),
                &mut self.rng,
            )
            .expect("empty contribution"),
            Err(e) => panic!("node {}: final round preparation failed: {e}", self.id),
        };
        let generated = prep.commitments.as_ref().map_or(0, |c| c.len() as u64);
        self.ops.commitments_generated += generated;
        if let Some(kind) = self.config.behaviour.corrupt {
            match mode {
                SecurityMode::Secured => {
                    let hit = inject_fault(
                        &mut prep,
                        &layout,
                        &seeds,
                        k,
                        kind,
                        None,
                        Some(&self.pedersen),
                        &mut self.rng,
                    );
                    if hit.is_some() {
                        self.ops.commitments_generated += generated;
                    }
                }
                SecurityMode::Unsecured => {
                    corrupt_unsecured(&mut prep.slices, &layout, prep.own_entry.as_ref())
                }
            }
        }
        let own_final = prep.own_entry.zip(outcome.announcement);
        let (_, round_id) = round_ids(instance);
        let driver = RoundDriver::start(
            round_id,
            &self.state.roster,
            self.id,
            prep.slices,
            prep.commitments,
            out,
        );
        self.round = Some(ActiveRound {
            instance,
            driver,
            context: RoundContext::Final {
                layout,
                own: own_final,
            },
        });
        self.drain_buffer(round_id, out);
    }

    fn drain_buffer(&mut self, round_id: u32, out: &mut Vec<Output>) {
        self.buffered.retain(|r, _| *r >= round_id);
        if let Some(envs) = self.buffered.remove(&round_id) {
            for e in envs {
                self.accept(&e);
            }
        }
        self.advance(out);
    }

    fn accept(&mut self, env: &Envelope) {
        let Some(from) = position(&self.state.roster, env.sender as usize) else {
            return;
        };
        if let Some(r) = self.round.as_mut() {
            r.driver.accept(from, &env.body);
        }
    }

    fn advance(&mut self, out: &mut Vec<Output>) {
        let Some(r) = self.round.as_mut() else { return };
        let deferred = self.config.opts.deferred;
        if r.driver.progress(
            &self.state.roster,
            self.id,
            deferred,
            &self.pedersen,
            &mut self.ops,
            out,
        ) {
            let round = self.round.take().expect("active round");
            self.finish_round(round, out);
        }
    }

    fn finish_round(&mut self, round: ActiveRound, out: &mut Vec<Output>) {
        let ActiveRound {
            instance,
            driver,
            context,
        } = round;
        let garbage = driver.garbage;
        let transcript = driver.transcript;
        match context {
            RoundContext::Initial {
                params,
                announcement,
                sealed,
                direct,
            } => {
                let summary = self.initial_result(
                    instance,
                    &transcript,
                    garbage,
                    params,
                    announcement,
                    sealed,
                    direct,
                    out,
                );
                self.store.insert(transcript);
                let (verdicts, summary) = summary;
                for v in verdicts {
                    self.step(Event::BlameVerdict(v), out);
                }
                self.step(Event::RoundComplete(summary), out);
            }
            RoundContext::Final { layout, own } => {
                let summary = self.final_result(instance, &transcript, garbage, &layout, own, out);
                self.store.insert(transcript);
                self.step(Event::RoundComplete(summary), out);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_result(
        &mut self,
        instance: u64,
        t: &RoundTranscript,
        garbage: bool,
        params: InitParams,
        announcement: Option<OwnAnnouncement>,
        sealed: Option<Vec<SealedSeed>>,
        direct: Option<(usize, Vec<u8>)>,
        out: &mut Vec<Output>,
    ) -> (Vec<crate::blame::Verdict>, RoundSummary) {
        let mut summary = RoundSummary {
            garbage,
            ..Default::default()
        };
        let slots = match t
            .result
            .as_ref()
            .map(|r| decode_initial_result(&r.values, &params))
        {
            Some(Ok(s)) => s,
            _ => {
                summary.garbage = true;
                self.initial = None;
                return (Vec::new(), summary);
            }
        };
        for i in validate_announcements(&slots, params.k, params.length_cap) {
            match i {
                Indicator::OccupancyExceeded { .. } => {}
                Indicator::LengthCapExceeded { .. } => summary.malformed += 1,
                Indicator::MalformedSlot { .. } => summary.collisions += 1,
            }
        }
        summary.occupied = slots.iter().filter(|s| !s.is_empty()).count();
        let mut verdicts = Vec::new();
        let keys = self.roster_keys();
        for (slot, s) in slots.iter().enumerate() {
            match s {
                SlotContent::Direct(b) if !b.is_empty() => {
                    out.push(Output::Delivered {
                        instance,
                        slot,
                        bytes: b.clone(),
                    });
                }
                SlotContent::Report => summary.garbage = true,
                SlotContent::Blame(b) => {
                    summary.blames += 1;
                    let Ok(blame) = BlameMessage::decode(b) else {
                        summary.malformed += 1;
                        continue;
                    };
                    let ctx = AdjudicationContext {
                        store: &self.store,
                        current_instance: instance,
                        keys: &keys,
                        params: InitParams::new(params.k, SecurityMode::Secured)
                            .with_length_cap(params.length_cap),
                        pedersen: &self.pedersen,
                    };
                    let (verified, additions) = blame_check_cost(&blame, &ctx);
                    self.ops.commitments_verified += verified;
                    self.ops.point_additions += additions;
                    match validate_blame(&blame, &ctx) {
                        Ok(v) => {
                            if let Some(node) = self.state.roster.get(v.accused) {
                                verdicts.push(crate::blame::Verdict {
                                    outcome: v.outcome,
                                    accused: *node,
                                });
                            }
                        }
                        Err(e) => {
                            self.log(out, &format!("BLAME_UNDECIDABLE:{e}").replace(' ', "_"))
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some((slot, bytes)) = direct {
            if matches!(&slots[slot], SlotContent::Direct(b) if *b == bytes) {
                self.outbox.pop_front();
            }
        }
        let intact = announcement
            .filter(|a| crate::init::own_announcement_intact(&slots, a, sealed.as_deref()));
        summary.any_length = compute_layout(&slots, params.length_cap).is_ok();
        self.initial = Some(InitialOutcome {
            instance,
            slots,
            announcement: intact,
        });
        (verdicts, summary)
    }

    fn final_result(
        &mut self,
        instance: u64,
        t: &RoundTranscript,
        garbage: bool,
        layout: &Layout,
        own: Option<(LayoutEntry, OwnAnnouncement)>,
        out: &mut Vec<Output>,
    ) -> RoundSummary {
        let mut summary = RoundSummary {
            garbage,
            occupied: layout.entries.len(),
            ..Default::default()
        };
        let extracted = match t
            .result
            .as_ref()
            .map(|r| extract_messages(&r.values, layout))
        {
            Some(Ok(e)) => e,
            _ => {
                summary.garbage = true;
                Vec::new()
            }
        };
        for m in &extracted {
            match &m.bytes {
                Some(b) => out.push(Output::Delivered {
                    instance,
                    slot: m.slot,
                    bytes: b.clone(),
                }),
                None => summary.collisions += 1,
            }
        }
        if let Some((entry, ann)) = own {
            let message = self.outbox.front().cloned().unwrap_or_default();
            let reservation = OwnReservation {
                slot: entry.slot,
                r: entry.r,
                length: entry.length,
                message: &message,
            };
            if detect_collision(&reservation, &extracted) {
                self.log(out, "COLLISION");
                if self.state.mode == SecurityMode::Unsecured {
                    self.pending_report = true;
                }
            } else {
                self.outbox.pop_front();
            }
            if t.mode() == ArithmeticMode::ModQBlocks {
                let k = self.state.k() as u64;
                let blocks = layout.interior_blocks(&entry).len() as u64;
                self.ops.commitments_verified += (k - 1) * blocks;
                self.ops.point_additions += (k - 1) * (k - 1) * blocks;
                let me = self.me();
                if let Ok(Some(peer)) = verify_zero_commitments(
                    &entry,
                    layout,
                    me,
                    &ann.seeds,
                    &t.commitments,
                    &self.pedersen,
                ) {
                    self.log(out, &format!("ACCUSE:{}", self.state.roster[peer]));
                    self.state.pending_blames.push_back(PendingBlame {
                        instance,
                        accused: peer,
                        slot: entry.slot,
                        seed: ann.seeds[peer],
                    });
                }
            }
        }
        summary
    }
}

/// Commitments verified and points added by the zero check behind a blame.
fn blame_check_cost(blame: &BlameMessage, ctx: &AdjudicationContext<'_>) -> (u64, u64) {
    let Some(referenced) = ctx
        .current_instance
        .checked_sub(u64::from(blame.round_offset))
    else {
        return (0, 0);
    };
    let (init_id, _) = round_ids(referenced);
    let layout = ctx
        .store
        .get(init_id)
        .and_then(|t| t.result.as_ref())
        .and_then(|r| decode_initial_result(&r.values, &ctx.params).ok())
        .and_then(|s| compute_layout(&s, ctx.params.length_cap).ok());
    match layout
        .as_ref()
        .and_then(|l| l.entry_for_slot(blame.slot as usize).map(|e| (l, e)))
    {
        Some((l, e)) => {
            let blocks = l.interior_blocks(e).len() as u64;
            (blocks, blocks * (ctx.params.k as u64 - 1))
        }
        None => (0, 0),
    }
}

/// Unsecured tampering: flip the first byte of the first foreign reservation.
fn corrupt_unsecured(slices: &mut SliceMatrix, layout: &Layout, own: Option<&LayoutEntry>) {
    let Some(target) = layout
        .entries
        .iter()
        .find(|e| Some(e.slot) != own.map(|o| o.slot))
    else {
        return;
    };
    if let Payload::Bytes(b) = &mut slices.slices[0] {
        b[target.bytes().start] ^= 0xff;
    }
}

impl Node for Participant {
    fn id(&self) -> usize {
        self.id
    }

    fn handle(&mut self, input: Input) -> Vec<Output> {
        let mut out = Vec::new();
        if self.dormant {
            return out;
        }
        match input {
            Input::Setup => {
                self.precompute();
                out.push(Output::Ready);
            }
            Input::Submit(m) => {
                if m.is_empty() || m.len() > self.config.length_cap as usize {
                    self.log(&mut out, &format!("REJECT_SUBMIT:{}", m.len()));
                } else {
                    self.outbox.push_back(m);
                }
            }
            Input::GroupReady => self.step(Event::GroupReady, &mut out),
            Input::Timer => self.step(Event::Timer, &mut out),
            Input::Precompute => self.precompute(),
            Input::Receive(env) => {
                let active = self.round.as_ref().map(|r| r.driver.round_id);
                if active == Some(env.round_id) {
                    self.accept(&env);
                    self.advance(&mut out);
                } else {
                    let floor = active.unwrap_or_else(|| round_ids(self.state.instance + 1).0);
                    if env.round_id >= floor {
                        self.buffered.entry(env.round_id).or_default().push(env);
                    }
                }
            }
        }
        out
    }

    fn ops(&self) -> OpCounts {
        self.ops
    }

    fn busy(&self) -> bool {
        !self.dormant
            && (self.round.is_some()
                || matches!(
                    self.state.phase,
                    Phase::InitialRound | Phase::FinalRound | Phase::Excluding
                ))
    }

    fn describe(&self) -> String {
        let round = self
            .round
            .as_ref()
            .map_or("none".to_string(), |r| r.driver.progress_line());
        format!(
            "{} dormant={} active=[{}] buffered={:?}",
            self.state,
            self.dormant,
            round,
            self.buffered.keys()
        )
    }
}
