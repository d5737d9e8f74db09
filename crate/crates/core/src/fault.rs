//! Fault injection for accountability tests, and an in-process group that runs
//! whole secured instances without a transport.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use crate::blame::round_ids;
use crate::crypto::{blinding_stream, Pedersen, Scalar, SealKeyPair, SealPublicKey, Seed};
use crate::dc::{commit_slices, run_local_round_with, DcError, RoundTranscript, TranscriptStore};
use crate::final_round::{
    compute_layout, extract_messages, prepare_final, stream_index, ExtractedMessage, FinalError,
    FinalPreparation, Layout, LayoutEntry, OwnReservation,
};
use crate::init::{
    decode_initial_result, prepare_initial, InitError, InitParams, InitialEntry, OwnAnnouncement,
    SecurityMode, SlotChoice, SlotContent,
};

/// Ways a participant can break the zero commitments of a foreign reservation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaultKind {
    /// Adds 1 to one slice block; the owner's message arrives altered.
    WrongValue,
    /// Keeps the value but commits under a different blinding.
    WrongBlinding,
    /// Blinds the reservation with the stream of another slot's seed.
    WrongSlot,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [
        FaultKind::WrongValue,
        FaultKind::WrongBlinding,
        FaultKind::WrongSlot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::WrongValue => "wrong-value",
            FaultKind::WrongBlinding => "wrong-blinding",
            FaultKind::WrongSlot => "wrong-slot",
        }
    }
}

/// Tampers with a prepared secured final round so that its commitments over
/// one foreign reservation no longer open to zero. Targets the first foreign
/// entry with interior blocks, or `target_slot` when given. Commitments are
/// recomputed when present. Returns the attacked slot, or `None` when there is
/// nothing to attack.
#[allow(clippy::too_many_arguments)]
pub fn inject_fault<R: RngCore + CryptoRng>(
    prep: &mut FinalPreparation,
    layout: &Layout,
    seeds: &BTreeMap<usize, Seed>,
    k: usize,
    kind: FaultKind,
    target_slot: Option<usize>,
    pedersen: Option<&Pedersen>,
    rng: &mut R,
) -> Option<usize> {
    let own_slot = prep.own_entry.map(|e| e.slot);
    let target: LayoutEntry = *layout.entries.iter().find(|e| {
        Some(e.slot) != own_slot
            && target_slot.map_or(true, |t| t == e.slot)
            && !layout.interior_blocks(e).is_empty()
            && seeds.contains_key(&e.slot)
    })?;
    let blocks = layout.interior_blocks(&target);
    let first = blocks.start;
    match kind {
        FaultKind::WrongValue => {
            if let crate::dc::Payload::Blocks(b) = &mut prep.slices.slices[0] {
                b[first] += Scalar::ONE;
            }
        }
        FaultKind::WrongBlinding => {
            prep.slices.blindings[0][first] += Scalar::ONE;
        }
        FaultKind::WrongSlot => {
            let other = seeds
                .iter()
                .find(|(slot, _)| **slot != target.slot)
                .map(|(_, s)| *s);
            let wrong = other.unwrap_or_else(|| Seed::random(rng));
            for b in blocks {
                for j in 0..k {
                    prep.slices.blindings[j][b] = blinding_stream(&wrong, stream_index(b, j, k));
                }
            }
        }
    }
    if let (Some(p), Some(_)) = (pedersen, &prep.commitments) {
        prep.commitments = Some(commit_slices(&prep.slices, p).expect("secured slices"));
    }
    Some(target.slot)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Final(#[from] FinalError),
    #[error(transparent)]
    Dc(#[from] DcError),
}

/// A fault to plant in one member's final-round contribution.
#[derive(Clone, Copy, Debug)]
pub struct PlannedFault {
    pub attacker: usize,
    pub kind: FaultKind,
    pub target_slot: Option<usize>,
}

/// Everything an instance of [`LocalGroup`] produced.
#[derive(Clone, Debug)]
pub struct InstanceRecord {
    pub instance: u64,
    pub slots: Vec<SlotContent>,
    pub layout: Option<Layout>,
    /// Announcement of each sending member.
    pub announcements: BTreeMap<usize, OwnAnnouncement>,
    /// Messages as extracted by member 0 (all members see the same result).
    pub extracted: Vec<ExtractedMessage>,
    /// Slot attacked by the planted fault, if it found one.
    pub attacked_slot: Option<usize>,
}

/// k members in one process running secured instances over `run_local_round`.
pub struct LocalGroup {
    pub params: InitParams,
    pub keys: Vec<SealKeyPair>,
    pub pedersen: Pedersen,
    /// Per-member retained transcripts.
    pub stores: Vec<TranscriptStore>,
}

impl LocalGroup {
    pub fn new<R: RngCore + CryptoRng>(k: usize, pedersen: Pedersen, rng: &mut R) -> Self {
        LocalGroup {
            params: InitParams::new(k, SecurityMode::Secured),
            keys: (0..k).map(|_| SealKeyPair::generate(rng)).collect(),
            pedersen,
            stores: (0..k).map(|_| TranscriptStore::default()).collect(),
        }
    }

    pub fn public_keys(&self) -> Vec<SealPublicKey> {
        self.keys.iter().map(SealKeyPair::public).collect()
    }

    fn store(&mut self, transcripts: Vec<RoundTranscript>) {
        for (store, t) in self.stores.iter_mut().zip(transcripts) {
            store.insert(t);
        }
    }

    /// Runs one secured instance. `messages` maps sender to message; senders
    /// take distinct slots (`2 · member`) so the instance never collides.
    pub fn run_instance<R: RngCore + CryptoRng>(
        &mut self,
        instance: u64,
        messages: &BTreeMap<usize, Vec<u8>>,
        fault: Option<PlannedFault>,
        rng: &mut R,
    ) -> Result<InstanceRecord, HarnessError> {
        let k = self.params.k;
        let pks = self.public_keys();
        let (init_id, final_id) = round_ids(instance);

        let mut announcements = BTreeMap::new();
        let mut matrices = Vec::with_capacity(k);
        let mut commitments = Vec::with_capacity(k);
        for i in 0..k {
            let entries = match messages.get(&i) {
                Some(m) => vec![InitialEntry::Message { length: m.len() }],
                None => vec![],
            };
            let prep = prepare_initial(
                &entries,
                SlotChoice::Fixed(2 * i),
                &self.params,
                &pks,
                Some(&self.pedersen),
                rng,
            )?;
            if let Some(a) = prep.announcement {
                announcements.insert(i, a);
            }
            matrices.push(prep.slices);
            commitments.push(prep.commitments.expect("secured"));
        }
        let transcripts = run_local_round_with(init_id, matrices, Some(commitments))?;
        let result = transcripts[0].result.clone().expect("complete round");
        self.store(transcripts);
        let slots = decode_initial_result(&result.values, &self.params)?;

        let layout = match compute_layout(&slots, self.params.length_cap) {
            Ok(l) => l,
            Err(FinalError::NoFinalRound) => {
                return Ok(InstanceRecord {
                    instance,
                    slots,
                    layout: None,
                    announcements,
                    extracted: Vec::new(),
                    attacked_slot: None,
                })
            }
            Err(e) => return Err(e.into()),
        };

        let mut matrices = Vec::with_capacity(k);
        let mut commitments = Vec::with_capacity(k);
        let mut attacked_slot = None;
        for i in 0..k {
            let mut seeds = BTreeMap::new();
            for (slot, s) in slots.iter().enumerate() {
                if let SlotContent::Announcement(a) = s {
                    let own = announcements.get(&i).is_some_and(|o| o.slot == slot);
                    if !own {
                        if let Ok(seed) = self.keys[i].open(&a.seeds[i]) {
                            seeds.insert(slot, seed);
                        }
                    }
                }
            }
            let own = announcements.get(&i).map(|a| OwnReservation {
                slot: a.slot,
                r: a.r,
                length: a.length,
                message: &messages[&i],
            });
            let mut prep = prepare_final(
                own,
                &layout,
                &seeds,
                k,
                SecurityMode::Secured,
                Some(&self.pedersen),
                rng,
            )?;
            if let Some(f) = fault.filter(|f| f.attacker == i) {
                attacked_slot = inject_fault(
                    &mut prep,
                    &layout,
                    &seeds,
                    k,
                    f.kind,
                    f.target_slot,
                    Some(&self.pedersen),
                    rng,
                );
            }
            matrices.push(prep.slices);
            commitments.push(prep.commitments.expect("secured"));
        }
        let transcripts = run_local_round_with(final_id, matrices, Some(commitments))?;
        let x = transcripts[0]
            .result
            .clone()
            .expect("complete round")
            .values;
        self.store(transcripts);
        let extracted = extract_messages(&x, &layout)?;
        Ok(InstanceRecord {
            instance,
            slots,
            layout: Some(layout),
            announcements,
            extracted,
            attacked_slot,
        })
    }
}
