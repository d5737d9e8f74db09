//! Accountability for the final round. Every non-owner blinds the blocks of a
//! foreign reservation with a stream keyed by the seed the owner sealed to it,
//! so its commitments there must open to zero under blindings the owner can
//! recompute. An owner whose message was damaged finds the peer that broke
//! this and publishes the seed; everyone else re-checks and excludes.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::crypto::{blinding_stream, seal, Commitment, Pedersen, Scalar, SealPublicKey, Seed};
use crate::dc::{CommitmentMatrix, TranscriptStore};
use crate::final_round::{compute_layout, stream_index, Layout, LayoutEntry};
use crate::init::{decode_initial_result, InitParams, SlotContent};
use crate::wire::{Reader, WireError, Writer};

pub const BLAME_LEN: usize = 2 + 2 + 2 + 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlameError {
    #[error("transcript of round {round} is no longer retained")]
    Evicted { round: u32 },
    #[error("round offset {0} does not name a past instance")]
    BadOffset(u16),
    #[error("commitments of peer {0} are missing")]
    MissingCommitments(usize),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlameMessage {
    /// Instances back from the one carrying the blame; 1 is the previous one.
    pub round_offset: u16,
    pub accused: u16,
    pub slot: u16,
    /// The seed the accuser sealed to the accused.
    pub seed: Seed,
}

impl BlameMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(BLAME_LEN);
        w.u16(self.round_offset)
            .u16(self.accused)
            .u16(self.slot)
            .bytes(&self.seed.0);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let m = BlameMessage {
            round_offset: r.u16()?,
            accused: r.u16()?,
            slot: r.u16()?,
            seed: Seed(r.array()?),
        };
        r.finish()?;
        Ok(m)
    }
}

pub fn build_blame(accused: usize, seed: Seed, slot: usize, round_offset: u16) -> BlameMessage {
    BlameMessage {
        round_offset,
        accused: accused as u16,
        slot: slot as u16,
        seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    AttackerConfirmed,
    BlameInvalid,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AttackerConfirmed => "ATTACKER_CONFIRMED",
            Outcome::BlameInvalid => "BLAME_INVALID",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub accused: usize,
}

/// Whether `peer`'s commitments over the interior blocks of `entry` open to
/// zero under the stream of `seed`. Returns the first failing block.
pub fn zero_check(
    entry: &LayoutEntry,
    layout: &Layout,
    seed: &Seed,
    peer_commitments: &CommitmentMatrix,
    pedersen: &Pedersen,
) -> Option<usize> {
    let k = peer_commitments.k();
    for b in layout.interior_blocks(entry) {
        if b >= peer_commitments.blocks() {
            return Some(b);
        }
        let sum: Commitment = (0..k).map(|j| *peer_commitments.get(j, b)).sum();
        let blinding: Scalar = (0..k)
            .map(|j| blinding_stream(seed, stream_index(b, j, k)))
            .sum();
        if !pedersen.verify(&sum, &Scalar::ZERO, &blinding) {
            return Some(b);
        }
    }
    None
}

/// Run by the owner of `entry`: checks every other peer's commitments over the
/// owner's reservation against the seeds the owner sent. `seeds_sent[i]` went
/// to peer `i`. Returns the first peer whose commitments are not zero ones.
pub fn verify_zero_commitments(
    entry: &LayoutEntry,
    layout: &Layout,
    owner: usize,
    seeds_sent: &[Seed],
    commitments: &BTreeMap<usize, Arc<CommitmentMatrix>>,
    pedersen: &Pedersen,
) -> Result<Option<usize>, BlameError> {
    for (peer, seed) in seeds_sent.iter().enumerate() {
        if peer == owner {
            continue;
        }
        let c = commitments
            .get(&peer)
            .ok_or(BlameError::MissingCommitments(peer))?;
        if zero_check(entry, layout, seed, c, pedersen).is_some() {
            return Ok(Some(peer));
        }
    }
    Ok(None)
}

/// Round ids of instance `n`: initial `2n`, final `2n + 1`.
pub fn round_ids(instance: u64) -> (u32, u32) {
    let base = u32::try_from(instance * 2).expect("instance counter fits round ids");
    (base, base + 1)
}

/// What an adjudicator needs besides the blame itself.
#[derive(Clone, Copy, Debug)]
pub struct AdjudicationContext<'a> {
    pub store: &'a TranscriptStore,
    /// Instance whose initial round carried the blame.
    pub current_instance: u64,
    /// Members' sealing keys in roster order.
    pub keys: &'a [SealPublicKey],
    /// Parameters of the referenced initial round.
    pub params: InitParams,
    pub pedersen: &'a Pedersen,
}

/// Decides a blame against the retained transcripts of the referenced instance.
///
/// The claimed seed must re-seal to the ciphertext the slot published for the
/// accused (sealing is deterministic), which stops an accuser from inventing a
/// seed under which an honest peer's commitments do not open to zero. With the
/// authentic seed, the accused is confirmed iff some interior block of the
/// slot fails the zero check.
pub fn validate_blame(
    b: &BlameMessage,
    ctx: &AdjudicationContext<'_>,
) -> Result<Verdict, BlameError> {
    let invalid = Verdict {
        outcome: Outcome::BlameInvalid,
        accused: b.accused as usize,
    };
    let offset = u64::from(b.round_offset);
    if offset == 0 || offset > ctx.current_instance {
        return Err(BlameError::BadOffset(b.round_offset));
    }
    let (init_id, final_id) = round_ids(ctx.current_instance - offset);
    let init = ctx
        .store
        .get(init_id)
        .ok_or(BlameError::Evicted { round: init_id })?;
    let fin = ctx
        .store
        .get(final_id)
        .ok_or(BlameError::Evicted { round: final_id })?;
    let accused = b.accused as usize;
    if accused >= ctx.keys.len() {
        return Ok(invalid);
    }
    let Some(result) = &init.result else {
        return Err(BlameError::Evicted { round: init_id });
    };
    let Ok(slots) = decode_initial_result(&result.values, &ctx.params) else {
        return Ok(invalid);
    };
    let Some(SlotContent::Announcement(ann)) = slots.get(b.slot as usize) else {
        return Ok(invalid);
    };
    if ann.seeds.get(accused) != Some(&seal(&ctx.keys[accused], &b.seed)) {
        return Ok(invalid);
    }
    let Ok(layout) = compute_layout(&slots, ctx.params.length_cap) else {
        return Ok(invalid);
    };
    let Some(entry) = layout.entry_for_slot(b.slot as usize) else {
        return Ok(invalid);
    };
    let commitments = fin
        .commitments
        .get(&accused)
        .ok_or(BlameError::MissingCommitments(accused))?;
    Ok(
        match zero_check(entry, &layout, &b.seed, commitments, ctx.pedersen) {
            Some(_) => Verdict {
                outcome: Outcome::AttackerConfirmed,
                accused,
            },
            None => invalid,
        },
    )
}
