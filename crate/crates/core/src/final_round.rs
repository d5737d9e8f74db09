//! The final round: every announced message at its prefix-sum offset in one
//! compound payload.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    blinding_stream, blocks_for, embed_bytes, extract_block, Pedersen, Scalar, Seed, BLOCK_LEN,
};
use crate::dc::{commit_slices, split_payload, CommitmentMatrix, DcError, Payload, SliceMatrix};
use crate::init::{SecurityMode, SlotContent};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FinalError {
    #[error("no announced lengths; the final round is skipped")]
    NoFinalRound,
    #[error("own announcement (slot {slot}) is not in the layout")]
    OwnAnnouncementLost { slot: usize },
    #[error("message of {got} bytes does not match the announced {announced}")]
    LengthMismatch { got: usize, announced: usize },
    #[error("combined payload has {got} units, layout needs {expected}")]
    WrongSize { expected: usize, got: usize },
    #[error(transparent)]
    Dc(#[from] DcError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayoutEntry {
    pub slot: usize,
    pub r: u16,
    pub length: u16,
    /// 1-indexed first byte in the compound message.
    pub offset: usize,
}

impl LayoutEntry {
    /// 0-indexed byte range.
    pub fn bytes(&self) -> Range<usize> {
        self.offset - 1..self.offset - 1 + self.length as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub total: usize,
}

impl Layout {
    pub fn blocks(&self) -> usize {
        blocks_for(self.total)
    }

    pub fn entry_for_slot(&self, slot: usize) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.slot == slot)
    }

    /// Entry holding the first byte of block `b`.
    pub fn block_owner(&self, b: usize) -> Option<&LayoutEntry> {
        let first = b * BLOCK_LEN;
        self.entries.iter().find(|e| e.bytes().contains(&first))
    }

    /// Whether block `b` holds any byte of `entry`.
    pub fn touches(&self, entry: &LayoutEntry, b: usize) -> bool {
        let r = entry.bytes();
        let block = b * BLOCK_LEN..(b + 1) * BLOCK_LEN;
        r.start < block.end && block.start < r.end
    }

    /// Blocks whose content lies entirely inside `entry`. Tail padding after
    /// the last message counts as part of it.
    pub fn interior_blocks(&self, entry: &LayoutEntry) -> Range<usize> {
        let r = entry.bytes();
        let first = r.start.div_ceil(BLOCK_LEN);
        let last = if r.end >= self.total {
            self.blocks()
        } else {
            r.end / BLOCK_LEN
        };
        first..last.max(first)
    }
}

/// Prefix-sum layout over the announcements in slot order. Announcements above
/// `length_cap` are left out.
pub fn compute_layout(slots: &[SlotContent], length_cap: u16) -> Result<Layout, FinalError> {
    let mut entries = Vec::new();
    let mut next = 1;
    for (slot, s) in slots.iter().enumerate() {
        if let SlotContent::Announcement(a) = s {
            if a.length == 0 || a.length > length_cap {
                continue;
            }
            entries.push(LayoutEntry {
                slot,
                r: a.r,
                length: a.length,
                offset: next,
            });
            next += a.length as usize;
        }
    }
    if entries.is_empty() {
        return Err(FinalError::NoFinalRound);
    }
    Ok(Layout {
        entries,
        total: next - 1,
    })
}

/// The sender's side of its reservation.
#[derive(Clone, Copy, Debug)]
pub struct OwnReservation<'a> {
    pub slot: usize,
    pub r: u16,
    pub length: u16,
    pub message: &'a [u8],
}

/// Where each cell's blinding comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlindingSource {
    Fresh,
    /// `blinding_stream(seed, block · k + peer)` with the seed opened from this slot.
    Stream {
        slot: usize,
    },
}

/// Blinding source for every block: fresh where the own reservation touches
/// the block, otherwise the stream of the slot holding the block's first byte.
pub fn blinding_sources(
    layout: &Layout,
    own: Option<&LayoutEntry>,
    seeds: &BTreeMap<usize, Seed>,
) -> Vec<BlindingSource> {
    (0..layout.blocks())
        .map(|b| {
            if own.is_some_and(|e| layout.touches(e, b)) {
                return BlindingSource::Fresh;
            }
            match layout.block_owner(b) {
                Some(e) if seeds.contains_key(&e.slot) => BlindingSource::Stream { slot: e.slot },
                _ => BlindingSource::Fresh,
            }
        })
        .collect()
}

/// Stream index of the cell for `peer` in global block `block`.
pub fn stream_index(block: usize, peer: usize, k: usize) -> u32 {
    u32::try_from(block * k + peer).expect("compound message within 2^32 cells")
}

#[derive(Clone, Debug)]
pub struct FinalPreparation {
    pub payload: Payload,
    pub slices: SliceMatrix,
    pub commitments: Option<CommitmentMatrix>,
    /// The own layout entry when sending.
    pub own_entry: Option<LayoutEntry>,
}

/// Builds this participant's compound payload: its message at its reservation,
/// zeros elsewhere. `seeds` maps foreign slots to the seed opened from them.
#[allow(clippy::too_many_arguments)]
pub fn prepare_final<R: RngCore + CryptoRng>(
    own: Option<OwnReservation<'_>>,
    layout: &Layout,
    seeds: &BTreeMap<usize, Seed>,
    k: usize,
    mode: SecurityMode,
    pedersen: Option<&Pedersen>,
    rng: &mut R,
) -> Result<FinalPreparation, FinalError> {
    let mut bytes = vec![0u8; layout.total];
    let own_entry = match own {
        None => None,
        Some(o) => {
            let e = layout
                .entries
                .iter()
                .find(|e| e.slot == o.slot && e.r == o.r && e.length == o.length)
                .copied()
                .ok_or(FinalError::OwnAnnouncementLost { slot: o.slot })?;
            if o.message.len() != e.length as usize {
                return Err(FinalError::LengthMismatch {
                    got: o.message.len(),
                    announced: e.length as usize,
                });
            }
            bytes[e.bytes()].copy_from_slice(o.message);
            Some(e)
        }
    };
    let payload = match mode {
        SecurityMode::Unsecured => Payload::Bytes(bytes),
        SecurityMode::Secured => Payload::Blocks(embed_bytes(&bytes)),
    };
    let mut slices = split_payload(&payload, k, rng)?;
    let mut commitments = None;
    if mode == SecurityMode::Secured {
        let sources = blinding_sources(layout, own_entry.as_ref(), seeds);
        slices.set_blindings(|peer, b| match sources[b] {
            BlindingSource::Fresh => Scalar::random(rng),
            BlindingSource::Stream { slot } => {
                blinding_stream(&seeds[&slot], stream_index(b, peer, k))
            }
        });
        if let Some(p) = pedersen {
            commitments = Some(commit_slices(&slices, p)?);
        }
    }
    Ok(FinalPreparation {
        payload,
        slices,
        commitments,
        own_entry,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedMessage {
    pub slot: usize,
    pub r: u16,
    /// `None` when a block of the reservation does not decode.
    pub bytes: Option<Vec<u8>>,
}

impl ExtractedMessage {
    pub fn is_corrupted(&self) -> bool {
        self.bytes.is_none()
    }
}

/// Cuts the combined result into per-entry messages.
pub fn extract_messages(x: &Payload, layout: &Layout) -> Result<Vec<ExtractedMessage>, FinalError> {
    let (bytes, bad_blocks): (Vec<u8>, Vec<bool>) = match x {
        Payload::Bytes(b) => {
            if b.len() != layout.total {
                return Err(FinalError::WrongSize {
                    expected: layout.total,
                    got: b.len(),
                });
            }
            (b.clone(), Vec::new())
        }
        Payload::Blocks(blocks) => {
            if blocks.len() != layout.blocks() {
                return Err(FinalError::WrongSize {
                    expected: layout.blocks(),
                    got: blocks.len(),
                });
            }
            let mut out = Vec::with_capacity(blocks.len() * BLOCK_LEN);
            let mut bad = Vec::with_capacity(blocks.len());
            for s in blocks {
                match extract_block(s) {
                    Ok(b) => {
                        out.extend_from_slice(&b);
                        bad.push(false);
                    }
                    Err(_) => {
                        out.extend_from_slice(&[0; BLOCK_LEN]);
                        bad.push(true);
                    }
                }
            }
            (out, bad)
        }
    };
    Ok(layout
        .entries
        .iter()
        .map(|e| {
            let r = e.bytes();
            let corrupted = (0..bad_blocks.len()).any(|b| bad_blocks[b] && layout.touches(e, b));
            ExtractedMessage {
                slot: e.slot,
                r: e.r,
                bytes: (!corrupted).then(|| bytes[r].to_vec()),
            }
        })
        .collect())
}

/// True when our reservation is missing or its content differs from what we sent.
pub fn detect_collision(own: &OwnReservation<'_>, extracted: &[ExtractedMessage]) -> bool {
    match extracted
        .iter()
        .find(|m| m.slot == own.slot && m.r == own.r)
    {
        Some(m) => m.bytes.as_deref() != Some(own.message),
        None => true,
    }
}
