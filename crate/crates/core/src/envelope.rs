//! Framing for everything participants send each other.
//!
//! `kind 1B ‖ round_id 4B ‖ sender 2B ‖ payload length 4B ‖ payload`

use std::sync::Arc;

use crate::dc::{Aggregate, CommitmentMatrix, ShareRow};
use crate::wire::{Reader, WireError, Writer};

pub const ENVELOPE_HEADER_LEN: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Kind {
    Commitments = 0x01,
    Shares = 0x02,
    Aggregate = 0x03,
    Control = 0x04,
    /// Point-to-point delivery of a decoded message to a target group.
    Transmit = 0x05,
}

impl Kind {
    pub fn from_u8(b: u8) -> Option<Kind> {
        Some(match b {
            0x01 => Kind::Commitments,
            0x02 => Kind::Shares,
            0x03 => Kind::Aggregate,
            0x04 => Kind::Control,
            0x05 => Kind::Transmit,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    /// Shared between all receivers of a broadcast.
    Commitments(Arc<CommitmentMatrix>),
    Shares(ShareRow),
    Aggregate(Aggregate),
    Control(Vec<u8>),
    Transmit(Vec<u8>),
}

impl Body {
    pub fn kind(&self) -> Kind {
        match self {
            Body::Commitments(_) => Kind::Commitments,
            Body::Shares(_) => Kind::Shares,
            Body::Aggregate(_) => Kind::Aggregate,
            Body::Control(_) => Kind::Control,
            Body::Transmit(_) => Kind::Transmit,
        }
    }

    pub fn wire_len(&self) -> usize {
        match self {
            Body::Commitments(c) => c.wire_len(),
            Body::Shares(s) => s.wire_len(),
            Body::Aggregate(a) => a.wire_len(),
            Body::Control(b) | Body::Transmit(b) => b.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub round_id: u32,
    /// Node id of the sender.
    pub sender: u16,
    pub body: Body,
}

impl Envelope {
    pub fn new(round_id: u32, sender: usize, body: Body) -> Self {
        Envelope {
            round_id,
            sender: u16::try_from(sender).expect("node ids fit 16 bits"),
            body,
        }
    }

    pub fn kind(&self) -> Kind {
        self.body.kind()
    }

    /// Encoded size in bytes, computed without encoding.
    pub fn wire_len(&self) -> usize {
        ENVELOPE_HEADER_LEN + self.body.wire_len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Writer::with_capacity(self.body.wire_len());
        match &self.body {
            Body::Commitments(c) => c.encode(&mut body),
            Body::Shares(s) => s.encode(&mut body),
            Body::Aggregate(a) => a.encode(&mut body),
            Body::Control(b) | Body::Transmit(b) => {
                body.bytes(b);
            }
        }
        let body = body.finish();
        let mut w = Writer::with_capacity(ENVELOPE_HEADER_LEN + body.len());
        w.u8(self.kind() as u8)
            .u32(self.round_id)
            .u16(self.sender)
            .u32(u32::try_from(body.len()).expect("payload below 4 GiB"))
            .bytes(&body);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let kind = Kind::from_u8(r.u8()?).ok_or(WireError::Invalid("envelope kind"))?;
        let round_id = r.u32()?;
        let sender = r.u16()?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?;
        r.finish()?;
        let mut p = Reader::new(payload);
        let body = match kind {
            Kind::Commitments => Body::Commitments(Arc::new(CommitmentMatrix::decode(&mut p)?)),
            Kind::Shares => Body::Shares(ShareRow::decode(&mut p)?),
            Kind::Aggregate => Body::Aggregate(Aggregate::decode(&mut p)?),
            Kind::Control => Body::Control(p.rest().to_vec()),
            Kind::Transmit => Body::Transmit(p.rest().to_vec()),
        };
        p.finish()?;
        Ok(Envelope {
            round_id,
            sender,
            body,
        })
    }
}
