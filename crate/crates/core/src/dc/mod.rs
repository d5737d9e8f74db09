//! Dining-cryptographers machinery shared by every round type: split a payload
//! into k additive slices, commit to them, sum what was received, and combine
//! the broadcast aggregates.

mod local;
mod transcript;
mod verify;

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use crate::crypto::{extract_bytes, Commitment, Pedersen, Scalar, ELEMENT_LEN, SCALAR_LEN};
use crate::wire::{Reader, WireError, Writer};

pub use local::{run_local_round, run_local_round_with};
pub use transcript::{
    read_transcripts, RoundTranscript, TranscriptLog, TranscriptStore, DEFAULT_RETENTION,
};
pub use verify::{
    check_aggregates, check_global, check_shares, verify_round, verify_round_scoped, CheckLevel,
    CheckStatus, Fault, VerificationReport, VerifyScope,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DcError {
    #[error("round incomplete: missing peers {missing:?}")]
    IncompleteRound { missing: Vec<usize> },
    #[error("payload arithmetic modes differ")]
    ModeMismatch,
    #[error("payload shapes differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("commitments need MOD_Q_BLOCKS slices with blindings")]
    NotCommittable,
    #[error("a DC round needs at least two participants")]
    TooFewParticipants,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithmeticMode {
    /// Byte vectors combined with XOR; unsecured rounds.
    Xor,
    /// One scalar per 31-byte block combined mod q; secured rounds.
    ModQBlocks,
}

impl ArithmeticMode {
    pub(crate) fn tag(self) -> u8 {
        match self {
            ArithmeticMode::Xor => 0,
            ArithmeticMode::ModQBlocks => 1,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Result<Self, WireError> {
        match t {
            0 => Ok(ArithmeticMode::Xor),
            1 => Ok(ArithmeticMode::ModQBlocks),
            _ => Err(WireError::Invalid("arithmetic mode")),
        }
    }
}

/// A round payload, or any additive share of one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Bytes(Vec<u8>),
    Blocks(Vec<Scalar>),
}

impl Payload {
    pub fn zero(mode: ArithmeticMode, len: usize) -> Self {
        match mode {
            ArithmeticMode::Xor => Payload::Bytes(vec![0; len]),
            ArithmeticMode::ModQBlocks => Payload::Blocks(vec![Scalar::ZERO; len]),
        }
    }

    pub fn random<R: RngCore + CryptoRng>(mode: ArithmeticMode, len: usize, rng: &mut R) -> Self {
        match mode {
            ArithmeticMode::Xor => {
                let mut b = vec![0; len];
                rng.fill_bytes(&mut b);
                Payload::Bytes(b)
            }
            ArithmeticMode::ModQBlocks => {
                Payload::Blocks((0..len).map(|_| Scalar::random(rng)).collect())
            }
        }
    }

    pub fn mode(&self) -> ArithmeticMode {
        match self {
            Payload::Bytes(_) => ArithmeticMode::Xor,
            Payload::Blocks(_) => ArithmeticMode::ModQBlocks,
        }
    }

    /// Bytes in XOR mode, blocks in MOD_Q_BLOCKS mode.
    pub fn len(&self) -> usize {
        match self {
            Payload::Bytes(b) => b.len(),
            Payload::Blocks(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Payload::Bytes(b) => b.iter().all(|x| *x == 0),
            Payload::Blocks(b) => b.iter().all(Scalar::is_zero),
        }
    }

    pub fn blocks(&self) -> Option<&[Scalar]> {
        match self {
            Payload::Blocks(b) => Some(b),
            Payload::Bytes(_) => None,
        }
    }

    fn check_shape(&self, other: &Payload) -> Result<(), DcError> {
        if self.mode() != other.mode() {
            return Err(DcError::ModeMismatch);
        }
        if self.len() != other.len() {
            return Err(DcError::ShapeMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Payload) -> Result<(), DcError> {
        self.check_shape(other)?;
        match (self, other) {
            (Payload::Bytes(a), Payload::Bytes(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x ^= y)
            }
            (Payload::Blocks(a), Payload::Blocks(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += *y)
            }
            _ => unreachable!("shape checked"),
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Payload) -> Result<(), DcError> {
        self.check_shape(other)?;
        match (self, other) {
            (Payload::Bytes(a), Payload::Bytes(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x ^= y)
            }
            (Payload::Blocks(a), Payload::Blocks(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x -= *y)
            }
            _ => unreachable!("shape checked"),
        }
        Ok(())
    }

    /// Decodes the payload back to bytes; block payloads fail if any block is
    /// not a valid 31-byte embedding.
    pub fn to_bytes(&self) -> Result<Vec<u8>, crate::crypto::CryptoError> {
        match self {
            Payload::Bytes(b) => Ok(b.clone()),
            Payload::Blocks(b) => extract_bytes(b),
        }
    }

    pub fn wire_len(&self) -> usize {
        1 + 4
            + match self {
                Payload::Bytes(b) => b.len(),
                Payload::Blocks(b) => b.len() * SCALAR_LEN,
            }
    }

    pub fn encode(&self, w: &mut Writer) {
        w.u8(self.mode().tag()).u32(self.len() as u32);
        match self {
            Payload::Bytes(b) => {
                w.bytes(b);
            }
            Payload::Blocks(b) => b.iter().for_each(|s| {
                w.scalar(s);
            }),
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let mode = ArithmeticMode::from_tag(r.u8()?)?;
        let n = r.u32()? as usize;
        match mode {
            ArithmeticMode::Xor => Ok(Payload::Bytes(r.take(n)?.to_vec())),
            ArithmeticMode::ModQBlocks => {
                if r.remaining() < n.saturating_mul(SCALAR_LEN) {
                    return Err(WireError::Truncated {
                        needed: n * SCALAR_LEN - r.remaining(),
                    });
                }
                (0..n)
                    .map(|_| r.scalar())
                    .collect::<Result<_, _>>()
                    .map(Payload::Blocks)
            }
        }
    }
}

fn encode_scalars(w: &mut Writer, s: &[Scalar]) {
    w.u32(s.len() as u32);
    for x in s {
        w.scalar(x);
    }
}

fn decode_scalars(r: &mut Reader<'_>) -> Result<Vec<Scalar>, WireError> {
    let n = r.u32()? as usize;
    if r.remaining() < n.saturating_mul(SCALAR_LEN) {
        return Err(WireError::Truncated {
            needed: n * SCALAR_LEN - r.remaining(),
        });
    }
    (0..n).map(|_| r.scalar()).collect()
}

/// One participant's k slices of its prepared payload, row `j` destined for
/// peer `j`, with matching blindings in MOD_Q_BLOCKS mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceMatrix {
    pub slices: Vec<Payload>,
    /// Empty in XOR mode, otherwise `k` rows of one blinding per block.
    pub blindings: Vec<Vec<Scalar>>,
}

impl SliceMatrix {
    pub fn k(&self) -> usize {
        self.slices.len()
    }

    pub fn mode(&self) -> ArithmeticMode {
        self.slices[0].mode()
    }

    /// Bytes (XOR) or blocks (MOD_Q_BLOCKS) per slice.
    pub fn width(&self) -> usize {
        self.slices[0].len()
    }

    /// Fills the blindings row by row from `f(peer, block)`.
    pub fn set_blindings(&mut self, mut f: impl FnMut(usize, usize) -> Scalar) {
        let (k, b) = (self.k(), self.width());
        self.blindings = (0..k).map(|j| (0..b).map(|t| f(j, t)).collect()).collect();
    }

    pub fn row(&self, j: usize) -> ShareRow {
        ShareRow {
            slice: self.slices[j].clone(),
            blindings: self.blindings.get(j).cloned().unwrap_or_default(),
        }
    }

    /// Blockwise sum of all slices, i.e. the prepared payload.
    pub fn recombine(&self) -> Payload {
        let mut acc = Payload::zero(self.mode(), self.width());
        for s in &self.slices {
            acc.add_assign(s).expect("rows share a shape");
        }
        acc
    }
}

/// What one peer sends another: a slice and its blindings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareRow {
    pub slice: Payload,
    pub blindings: Vec<Scalar>,
}

impl ShareRow {
    pub fn wire_len(&self) -> usize {
        self.slice.wire_len() + 4 + self.blindings.len() * SCALAR_LEN
    }

    pub fn encode(&self, w: &mut Writer) {
        self.slice.encode(w);
        encode_scalars(w, &self.blindings);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let slice = Payload::decode(r)?;
        let blindings = decode_scalars(r)?;
        Ok(ShareRow { slice, blindings })
    }
}

/// A participant's broadcast `(R_i, S_i)`: the blockwise sums of everything it
/// received. Also used for the combined result `(R, X)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate {
    pub values: Payload,
    pub blindings: Vec<Scalar>,
}

impl Aggregate {
    pub fn wire_len(&self) -> usize {
        self.values.wire_len() + 4 + self.blindings.len() * SCALAR_LEN
    }

    pub fn encode(&self, w: &mut Writer) {
        self.values.encode(w);
        encode_scalars(w, &self.blindings);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let values = Payload::decode(r)?;
        let blindings = decode_scalars(r)?;
        Ok(Aggregate { values, blindings })
    }
}

/// `k × B` commitments of one participant; entry `(j, t)` commits to the slice
/// for peer `j` at block `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitmentMatrix {
    k: usize,
    blocks: usize,
    entries: Vec<Commitment>,
}

impl CommitmentMatrix {
    pub fn new(k: usize, blocks: usize, entries: Vec<Commitment>) -> Self {
        assert_eq!(entries.len(), k * blocks, "commitment grid shape");
        CommitmentMatrix { k, blocks, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn get(&self, peer: usize, block: usize) -> &Commitment {
        &self.entries[peer * self.blocks + block]
    }

    pub fn get_mut(&mut self, peer: usize, block: usize) -> &mut Commitment {
        &mut self.entries[peer * self.blocks + block]
    }

    pub fn row(&self, peer: usize) -> &[Commitment] {
        &self.entries[peer * self.blocks..(peer + 1) * self.blocks]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn wire_len(&self) -> usize {
        2 + 4 + self.entries.len() * ELEMENT_LEN
    }

    pub fn encode(&self, w: &mut Writer) {
        w.u16(self.k as u16).u32(self.blocks as u32);
        for c in &self.entries {
            w.commitment(c);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let k = r.u16()? as usize;
        let blocks = r.u32()? as usize;
        let n = k
            .checked_mul(blocks)
            .ok_or(WireError::Invalid("commitment grid size"))?;
        if r.remaining() < n.saturating_mul(ELEMENT_LEN) {
            return Err(WireError::Truncated {
                needed: n * ELEMENT_LEN - r.remaining(),
            });
        }
        let entries = (0..n).map(|_| r.commitment()).collect::<Result<_, _>>()?;
        Ok(CommitmentMatrix { k, blocks, entries })
    }
}

/// Splits `payload` into `k` slices: `k − 1` uniform, the last one the
/// difference, so the slices sum (or XOR) to the payload. Blindings are left
/// empty; callers attach them with [`SliceMatrix::set_blindings`].
pub fn split_payload<R: RngCore + CryptoRng>(
    payload: &Payload,
    k: usize,
    rng: &mut R,
) -> Result<SliceMatrix, DcError> {
    if k < 2 {
        return Err(DcError::TooFewParticipants);
    }
    let mut last = payload.clone();
    let mut slices = Vec::with_capacity(k);
    for _ in 0..k - 1 {
        let s = Payload::random(payload.mode(), payload.len(), rng);
        last.sub_assign(&s)?;
        slices.push(s);
    }
    slices.push(last);
    Ok(SliceMatrix {
        slices,
        blindings: Vec::new(),
    })
}

pub fn commit_slices(m: &SliceMatrix, pedersen: &Pedersen) -> Result<CommitmentMatrix, DcError> {
    if m.mode() != ArithmeticMode::ModQBlocks || m.blindings.len() != m.k() {
        return Err(DcError::NotCommittable);
    }
    let blocks = m.width();
    let mut entries = Vec::with_capacity(m.k() * blocks);
    for (slice, blind) in m.slices.iter().zip(&m.blindings) {
        let values = slice.blocks().expect("mode checked");
        if blind.len() != blocks {
            return Err(DcError::NotCommittable);
        }
        entries.extend(values.iter().zip(blind).map(|(v, r)| pedersen.commit(v, r)));
    }
    Ok(CommitmentMatrix::new(m.k(), blocks, entries))
}

fn missing(k: usize, present: impl Fn(usize) -> bool) -> Vec<usize> {
    (0..k).filter(|i| !present(*i)).collect()
}

fn sum_rows<'a>(
    rows: impl Iterator<Item = (&'a Payload, &'a [Scalar])>,
    mode: ArithmeticMode,
    width: usize,
) -> Result<Aggregate, DcError> {
    let mut values = Payload::zero(mode, width);
    let mut blindings = match mode {
        ArithmeticMode::Xor => Vec::new(),
        ArithmeticMode::ModQBlocks => vec![Scalar::ZERO; width],
    };
    for (v, r) in rows {
        values.add_assign(v)?;
        if mode == ArithmeticMode::ModQBlocks {
            if r.len() != width {
                return Err(DcError::ShapeMismatch(width, r.len()));
            }
            blindings.iter_mut().zip(r).for_each(|(a, b)| *a += *b);
        }
    }
    Ok(Aggregate { values, blindings })
}

/// Sums the rows addressed to this node, keyed by sender position. The own row
/// (never sent) must be included.
pub fn aggregate_received(
    k: usize,
    rows: &BTreeMap<usize, ShareRow>,
) -> Result<Aggregate, DcError> {
    let gaps = missing(k, |i| rows.contains_key(&i));
    if !gaps.is_empty() {
        return Err(DcError::IncompleteRound { missing: gaps });
    }
    let first = &rows[&0].slice;
    sum_rows(
        rows.values().map(|r| (&r.slice, r.blindings.as_slice())),
        first.mode(),
        first.len(),
    )
}

/// Sums all k broadcast aggregates into the round result `(R, X)`.
pub fn combine_broadcasts(
    k: usize,
    aggregates: &BTreeMap<usize, Aggregate>,
) -> Result<Aggregate, DcError> {
    let gaps = missing(k, |i| aggregates.contains_key(&i));
    if !gaps.is_empty() {
        return Err(DcError::IncompleteRound { missing: gaps });
    }
    let first = &aggregates[&0].values;
    sum_rows(
        aggregates
            .values()
            .map(|a| (&a.values, a.blindings.as_slice())),
        first.mode(),
        first.len(),
    )
}
