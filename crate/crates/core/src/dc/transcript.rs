use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::wire::{Reader, WireError, Writer};

use super::{Aggregate, ArithmeticMode, CommitmentMatrix, Payload, ShareRow, SliceMatrix};

/// Rounds kept for deferred validation and blame adjudication.
pub const DEFAULT_RETENTION: usize = 16;

/// Everything one node saw in one DC round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundTranscript {
    pub round_id: u32,
    pub k: usize,
    pub self_index: usize,
    pub own: SliceMatrix,
    /// Rows received from each other peer.
    pub received: BTreeMap<usize, ShareRow>,
    /// Commitment matrices by sender, including our own.
    pub commitments: BTreeMap<usize, Arc<CommitmentMatrix>>,
    /// Broadcast aggregates by sender, including our own.
    pub aggregates: BTreeMap<usize, Aggregate>,
    pub result: Option<Aggregate>,
}

impl RoundTranscript {
    pub fn new(round_id: u32, self_index: usize, own: SliceMatrix) -> Self {
        RoundTranscript {
            round_id,
            k: own.k(),
            self_index,
            own,
            received: BTreeMap::new(),
            commitments: BTreeMap::new(),
            aggregates: BTreeMap::new(),
            result: None,
        }
    }

    pub fn mode(&self) -> ArithmeticMode {
        self.own.mode()
    }

    /// Blocks (or bytes in XOR mode) per slice.
    pub fn blocks(&self) -> usize {
        self.own.width()
    }

    /// Rows addressed to this node, including the one it kept for itself.
    pub fn rows_for_aggregate(&self) -> BTreeMap<usize, ShareRow> {
        let mut rows = self.received.clone();
        rows.insert(self.self_index, self.own.row(self.self_index));
        rows
    }

    pub fn has_all_shares(&self) -> bool {
        (0..self.k).all(|j| j == self.self_index || self.received.contains_key(&j))
    }

    pub fn has_all_commitments(&self) -> bool {
        (0..self.k).all(|j| self.commitments.contains_key(&j))
    }

    pub fn has_all_aggregates(&self) -> bool {
        (0..self.k).all(|j| self.aggregates.contains_key(&j))
    }

    pub fn is_complete(&self) -> bool {
        let secured = self.mode() == ArithmeticMode::ModQBlocks;
        self.has_all_shares()
            && self.has_all_aggregates()
            && self.result.is_some()
            && (!secured || self.has_all_commitments())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.round_id)
            .u16(self.k as u16)
            .u8(self.mode().tag())
            .u16(self.self_index as u16);
        for s in &self.own.slices {
            s.encode(&mut w);
        }
        w.u16(self.own.blindings.len() as u16);
        for row in &self.own.blindings {
            w.u32(row.len() as u32);
            row.iter().for_each(|s| {
                w.scalar(s);
            });
        }
        w.u16(self.received.len() as u16);
        for (j, row) in &self.received {
            w.u16(*j as u16);
            row.encode(&mut w);
        }
        w.u16(self.commitments.len() as u16);
        for (j, m) in &self.commitments {
            w.u16(*j as u16);
            m.encode(&mut w);
        }
        w.u16(self.aggregates.len() as u16);
        for (j, a) in &self.aggregates {
            w.u16(*j as u16);
            a.encode(&mut w);
        }
        match &self.result {
            None => {
                w.u8(0);
            }
            Some(a) => {
                w.u8(1);
                a.encode(&mut w);
            }
        }
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(buf);
        let round_id = r.u32()?;
        let k = r.u16()? as usize;
        let mode = ArithmeticMode::from_tag(r.u8()?)?;
        let self_index = r.u16()? as usize;
        let slices = (0..k)
            .map(|_| Payload::decode(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        if slices.iter().any(|s| s.mode() != mode) {
            return Err(WireError::Invalid("slice mode"));
        }
        let rows = r.u16()? as usize;
        let mut blindings = Vec::with_capacity(rows);
        for _ in 0..rows {
            let n = r.u32()? as usize;
            blindings.push((0..n).map(|_| r.scalar()).collect::<Result<Vec<_>, _>>()?);
        }
        let mut t = RoundTranscript::new(round_id, self_index, SliceMatrix { slices, blindings });
        for _ in 0..r.u16()? {
            let j = r.u16()? as usize;
            t.received.insert(j, ShareRow::decode(&mut r)?);
        }
        for _ in 0..r.u16()? {
            let j = r.u16()? as usize;
            t.commitments
                .insert(j, Arc::new(CommitmentMatrix::decode(&mut r)?));
        }
        for _ in 0..r.u16()? {
            let j = r.u16()? as usize;
            t.aggregates.insert(j, Aggregate::decode(&mut r)?);
        }
        t.result = match r.u8()? {
            0 => None,
            1 => Some(Aggregate::decode(&mut r)?),
            _ => return Err(WireError::Invalid("result flag")),
        };
        r.finish()?;
        Ok(t)
    }
}

/// In-memory retention window of transcripts, keyed by round id.
#[derive(Clone, Debug)]
pub struct TranscriptStore {
    retain: usize,
    rounds: BTreeMap<u32, RoundTranscript>,
}

impl Default for TranscriptStore {
    fn default() -> Self {
        TranscriptStore::new(DEFAULT_RETENTION)
    }
}

impl TranscriptStore {
    pub fn new(retain: usize) -> Self {
        TranscriptStore {
            retain: retain.max(1),
            rounds: BTreeMap::new(),
        }
    }

    /// Stores a transcript, evicting the oldest rounds beyond the window.
    pub fn insert(&mut self, t: RoundTranscript) {
        self.rounds.insert(t.round_id, t);
        while self.rounds.len() > self.retain {
            self.rounds.pop_first();
        }
    }

    pub fn get(&self, round_id: u32) -> Option<&RoundTranscript> {
        self.rounds.get(&round_id)
    }

    pub fn get_mut(&mut self, round_id: u32) -> Option<&mut RoundTranscript> {
        self.rounds.get_mut(&round_id)
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn clear(&mut self) {
        self.rounds.clear();
    }

    pub fn round_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.rounds.keys().copied()
    }
}

/// Append-only transcript file: each record is a 4-byte big-endian length
/// followed by [`RoundTranscript::encode`].
pub struct TranscriptLog {
    file: File,
}

impl TranscriptLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranscriptLog { file })
    }

    pub fn append(&mut self, t: &RoundTranscript) -> io::Result<()> {
        let record = t.encode();
        let len = u32::try_from(record.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "record too large"))?;
        let mut buf = Vec::with_capacity(4 + record.len());
        buf.extend_from_slice(&len.to_be_bytes());
        buf.extend_from_slice(&record);
        self.file.write_all(&buf)?;
        self.file.flush()
    }
}

pub fn read_transcripts(path: impl AsRef<Path>) -> io::Result<Vec<RoundTranscript>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut r = Reader::new(&bytes);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        let invalid = |e: WireError| io::Error::new(io::ErrorKind::InvalidData, e);
        let len = r.u32().map_err(invalid)? as usize;
        let record = r.take(len).map_err(invalid)?;
        out.push(RoundTranscript::decode(record).map_err(invalid)?);
    }
    Ok(out)
}
