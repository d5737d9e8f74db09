//! The initial round: 2k fixed-width slots in which senders announce a random
//! identifier, a message length and (secured) one sealed seed per member.

use std::collections::BTreeSet;

use rand::{CryptoRng, Rng, RngCore};

use crate::crypto::{
    blocks_for, embed_bytes, extract_bytes, seal, Pedersen, Scalar, SealPublicKey, SealedSeed,
    Seed, BLOCK_LEN, CT_LEN,
};
use crate::dc::{
    commit_slices, split_payload, ArithmeticMode, CommitmentMatrix, DcError, Payload, SliceMatrix,
};

/// Identifier of an empty slot.
pub const R_EMPTY: u16 = 0;
/// Identifier of a slot carrying a blame message or a collision report.
pub const R_BLAME: u16 = 1;
/// Identifier of a slot carrying a message directly.
pub const R_DIRECT: u16 = 2;
/// Smallest identifier a length announcement may use.
pub const R_MIN: u16 = 3;

const HEADER_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SecurityMode {
    Secured,
    Unsecured,
}

impl SecurityMode {
    pub fn arithmetic(self) -> ArithmeticMode {
        match self {
            SecurityMode::Secured => ArithmeticMode::ModQBlocks,
            SecurityMode::Unsecured => ArithmeticMode::Xor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SecurityMode::Secured => "SECURED",
            SecurityMode::Unsecured => "UNSECURED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("message length {length} exceeds the cap of {cap} bytes")]
    LengthCapExceeded { length: usize, cap: u16 },
    #[error("message length must be positive")]
    EmptyMessage,
    #[error("slot {slot} out of range for {slots} slots")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("no free slot left")]
    NoFreeSlot,
    #[error("{got} recipient keys for a group of {k}")]
    RecipientCount { got: usize, k: usize },
    #[error("slot payload of {len} bytes exceeds the {capacity} byte capacity")]
    PayloadTooLarge { len: usize, capacity: usize },
    #[error("combined payload has the wrong size: expected {expected}, got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error("sealed seed length {0} below the {CT_LEN}-byte minimum")]
    CiphertextLength(usize),
    #[error(transparent)]
    Dc(#[from] DcError),
}

/// Shape parameters of an initial round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitParams {
    pub k: usize,
    pub mode: SecurityMode,
    /// Bytes reserved per sealed seed; at least [`CT_LEN`].
    pub ct_len: usize,
    /// Largest length a sender may announce.
    pub length_cap: u16,
}

impl InitParams {
    pub fn new(k: usize, mode: SecurityMode) -> Self {
        InitParams {
            k,
            mode,
            ct_len: CT_LEN,
            length_cap: u16::MAX,
        }
    }

    pub fn with_length_cap(mut self, cap: u16) -> Self {
        self.length_cap = cap;
        self
    }

    pub fn slots(&self) -> usize {
        2 * self.k
    }

    /// Secured: `4 + k · ct_len` rounded up to whole blocks. Unsecured: 4.
    pub fn slot_width(&self) -> usize {
        match self.mode {
            SecurityMode::Secured => blocks_for(HEADER_LEN + self.k * self.ct_len) * BLOCK_LEN,
            SecurityMode::Unsecured => HEADER_LEN,
        }
    }

    /// Bytes available after the header, e.g. for direct messages or blames.
    pub fn slot_capacity(&self) -> usize {
        self.slot_width() - HEADER_LEN
    }

    pub fn payload_bytes(&self) -> usize {
        self.slots() * self.slot_width()
    }

    /// Length of the round payload in its arithmetic unit (bytes or blocks).
    pub fn payload_len(&self) -> usize {
        match self.mode {
            SecurityMode::Secured => self.payload_bytes() / BLOCK_LEN,
            SecurityMode::Unsecured => self.payload_bytes(),
        }
    }

    fn validate(&self) -> Result<(), InitError> {
        if self.k < 2 {
            return Err(DcError::TooFewParticipants.into());
        }
        if self.ct_len < CT_LEN {
            return Err(InitError::CiphertextLength(self.ct_len));
        }
        Ok(())
    }
}

/// A decoded length announcement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthAnnouncement {
    pub r: u16,
    pub length: u16,
    /// One per member in roster order; empty in unsecured rounds.
    pub seeds: Vec<SealedSeed>,
}

/// One decoded slot of an initial-round result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlotContent {
    Empty,
    Announcement(LengthAnnouncement),
    /// A blame message under `r = 1`.
    Blame(Vec<u8>),
    /// `r = 1` with no body: a sender reporting its message was damaged.
    Report,
    /// A message carried directly under `r = 2`.
    Direct(Vec<u8>),
    /// Undecodable or inconsistent slot; evidence of a collision or attack.
    Malformed,
}

impl SlotContent {
    pub fn is_empty(&self) -> bool {
        matches!(self, SlotContent::Empty)
    }

    pub fn announcement(&self) -> Option<&LengthAnnouncement> {
        match self {
            SlotContent::Announcement(a) => Some(a),
            _ => None,
        }
    }
}

fn header(r: u16, length: u16) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..2].copy_from_slice(&r.to_be_bytes());
    h[2..].copy_from_slice(&length.to_be_bytes());
    h
}

/// Byte image of one slot: `r ‖ ℓ ‖ body ‖ zero padding`.
pub fn encode_slot(content: &SlotContent, params: &InitParams) -> Result<Vec<u8>, InitError> {
    let width = params.slot_width();
    let mut out = vec![0u8; width];
    let body_fits = |len: usize| {
        if len > params.slot_capacity() {
            Err(InitError::PayloadTooLarge {
                len,
                capacity: params.slot_capacity(),
            })
        } else {
            Ok(())
        }
    };
    match content {
        SlotContent::Empty => {}
        SlotContent::Malformed => out.fill(0xff),
        SlotContent::Report => out[..HEADER_LEN].copy_from_slice(&header(R_BLAME, 0)),
        SlotContent::Blame(body) | SlotContent::Direct(body) => {
            body_fits(body.len())?;
            let r = if matches!(content, SlotContent::Blame(_)) {
                R_BLAME
            } else {
                R_DIRECT
            };
            out[..HEADER_LEN].copy_from_slice(&header(r, body.len() as u16));
            out[HEADER_LEN..HEADER_LEN + body.len()].copy_from_slice(body);
        }
        SlotContent::Announcement(a) => {
            out[..HEADER_LEN].copy_from_slice(&header(a.r, a.length));
            if params.mode == SecurityMode::Secured {
                if a.seeds.len() != params.k {
                    return Err(InitError::RecipientCount {
                        got: a.seeds.len(),
                        k: params.k,
                    });
                }
                for (i, s) in a.seeds.iter().enumerate() {
                    let at = HEADER_LEN + i * params.ct_len;
                    out[at..at + CT_LEN].copy_from_slice(&s.0);
                }
            }
        }
    }
    Ok(out)
}

fn all_zero(b: &[u8]) -> bool {
    b.iter().all(|x| *x == 0)
}

/// Parses one slot's bytes. Anything inconsistent is `Malformed`.
pub fn decode_slot(bytes: &[u8], params: &InitParams) -> SlotContent {
    let r = u16::from_be_bytes([bytes[0], bytes[1]]);
    let length = u16::from_be_bytes([bytes[2], bytes[3]]);
    let body = &bytes[HEADER_LEN..];
    let len = length as usize;
    match r {
        R_EMPTY if length == 0 && all_zero(body) => SlotContent::Empty,
        R_EMPTY => SlotContent::Malformed,
        R_BLAME if length == 0 && all_zero(body) => SlotContent::Report,
        R_BLAME | R_DIRECT => {
            if len > body.len() || !all_zero(&body[len..]) {
                return SlotContent::Malformed;
            }
            let payload = body[..len].to_vec();
            if r == R_BLAME {
                SlotContent::Blame(payload)
            } else {
                SlotContent::Direct(payload)
            }
        }
        _ if length == 0 => SlotContent::Malformed,
        _ => match params.mode {
            SecurityMode::Unsecured => SlotContent::Announcement(LengthAnnouncement {
                r,
                length,
                seeds: Vec::new(),
            }),
            SecurityMode::Secured => {
                let mut seeds = Vec::with_capacity(params.k);
                for i in 0..params.k {
                    let chunk = &body[i * params.ct_len..(i + 1) * params.ct_len];
                    if !all_zero(&chunk[CT_LEN..]) {
                        return SlotContent::Malformed;
                    }
                    seeds.push(SealedSeed(
                        chunk[..CT_LEN].try_into().expect("CT_LEN bytes"),
                    ));
                }
                if !all_zero(&body[params.k * params.ct_len..]) {
                    return SlotContent::Malformed;
                }
                SlotContent::Announcement(LengthAnnouncement { r, length, seeds })
            }
        },
    }
}

/// Builds the round payload from per-slot contents; unlisted slots are empty.
pub fn encode_initial(
    occupied: &[(usize, SlotContent)],
    params: &InitParams,
) -> Result<Payload, InitError> {
    params.validate()?;
    let width = params.slot_width();
    let mut bytes = vec![0u8; params.payload_bytes()];
    for (slot, content) in occupied {
        if *slot >= params.slots() {
            return Err(InitError::SlotOutOfRange {
                slot: *slot,
                slots: params.slots(),
            });
        }
        let enc = encode_slot(content, params)?;
        // Overlapping entries combine like a collision would.
        for (d, s) in bytes[slot * width..(slot + 1) * width].iter_mut().zip(enc) {
            *d ^= s;
        }
    }
    Ok(match params.mode {
        SecurityMode::Unsecured => Payload::Bytes(bytes),
        SecurityMode::Secured => Payload::Blocks(embed_bytes(&bytes)),
    })
}

/// Splits a combined initial-round result into its 2k slots.
pub fn decode_initial_result(
    x: &Payload,
    params: &InitParams,
) -> Result<Vec<SlotContent>, InitError> {
    params.validate()?;
    if x.mode() != params.mode.arithmetic() {
        return Err(DcError::ModeMismatch.into());
    }
    if x.len() != params.payload_len() {
        return Err(InitError::WrongSize {
            expected: params.payload_len(),
            got: x.len(),
        });
    }
    let width = params.slot_width();
    let mut out = Vec::with_capacity(params.slots());
    for slot in 0..params.slots() {
        let content = match x {
            Payload::Bytes(b) => decode_slot(&b[slot * width..(slot + 1) * width], params),
            Payload::Blocks(b) => {
                let per = width / BLOCK_LEN;
                match extract_bytes(&b[slot * per..(slot + 1) * per]) {
                    Ok(bytes) => decode_slot(&bytes, params),
                    Err(_) => SlotContent::Malformed,
                }
            }
        };
        out.push(content);
    }
    Ok(out)
}

/// What a participant wants to place in an initial round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialEntry {
    /// Announce a message of this many bytes for the final round.
    Message { length: usize },
    /// Send these bytes directly in the slot.
    Direct(Vec<u8>),
    /// Carry an encoded blame message.
    Blame(Vec<u8>),
    /// Report a damaged final-round message.
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotChoice {
    /// Uniformly random free slot.
    Random,
    /// This slot for the first entry; further entries go to random free slots.
    /// Evaluation only: fixed slots are linkable across rounds.
    Fixed(usize),
}

/// The sender's own announcement, kept to fill the final round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnAnnouncement {
    pub slot: usize,
    pub r: u16,
    pub length: u16,
    /// Seed for each member, in roster order (own position included).
    pub seeds: Vec<Seed>,
}

#[derive(Clone, Debug)]
pub struct InitialPreparation {
    pub announcement: Option<OwnAnnouncement>,
    pub occupied: Vec<(usize, SlotContent)>,
    pub payload: Payload,
    pub slices: SliceMatrix,
    pub commitments: Option<CommitmentMatrix>,
}

/// Prepares this participant's initial-round contribution. Secured rounds get
/// fresh random blindings, and commitments when a context is given.
pub fn prepare_initial<R: RngCore + CryptoRng>(
    entries: &[InitialEntry],
    choice: SlotChoice,
    params: &InitParams,
    recipients: &[SealPublicKey],
    pedersen: Option<&Pedersen>,
    rng: &mut R,
) -> Result<InitialPreparation, InitError> {
    params.validate()?;
    let mut announcement = None;
    let mut occupied: Vec<(usize, SlotContent)> = Vec::new();
    let mut taken = BTreeSet::new();
    for (n, entry) in entries.iter().enumerate() {
        let slot = match (n, choice) {
            (0, SlotChoice::Fixed(s)) if s >= params.slots() => {
                return Err(InitError::SlotOutOfRange {
                    slot: s,
                    slots: params.slots(),
                })
            }
            (0, SlotChoice::Fixed(s)) => s,
            _ => {
                let free: Vec<usize> = (0..params.slots()).filter(|s| !taken.contains(s)).collect();
                if free.is_empty() {
                    return Err(InitError::NoFreeSlot);
                }
                free[rng.gen_range(0..free.len())]
            }
        };
        taken.insert(slot);
        let content = match entry {
            InitialEntry::Message { length } => {
                if *length == 0 {
                    return Err(InitError::EmptyMessage);
                }
                if *length > params.length_cap as usize {
                    return Err(InitError::LengthCapExceeded {
                        length: *length,
                        cap: params.length_cap,
                    });
                }
                let r: u16 = rng.gen_range(R_MIN..=u16::MAX);
                let (seeds, sealed) = match params.mode {
                    SecurityMode::Secured => {
                        if recipients.len() != params.k {
                            return Err(InitError::RecipientCount {
                                got: recipients.len(),
                                k: params.k,
                            });
                        }
                        let seeds: Vec<Seed> = (0..params.k).map(|_| Seed::random(rng)).collect();
                        let sealed = recipients
                            .iter()
                            .zip(&seeds)
                            .map(|(pk, s)| seal(pk, s))
                            .collect();
                        (seeds, sealed)
                    }
                    SecurityMode::Unsecured => (Vec::new(), Vec::new()),
                };
                announcement = Some(OwnAnnouncement {
                    slot,
                    r,
                    length: *length as u16,
                    seeds,
                });
                SlotContent::Announcement(LengthAnnouncement {
                    r,
                    length: *length as u16,
                    seeds: sealed,
                })
            }
            InitialEntry::Direct(b) => SlotContent::Direct(b.clone()),
            InitialEntry::Blame(b) => SlotContent::Blame(b.clone()),
            InitialEntry::Report => SlotContent::Report,
        };
        occupied.push((slot, content));
    }
    let payload = encode_initial(&occupied, params)?;
    let mut slices = split_payload(&payload, params.k, rng)?;
    let mut commitments = None;
    if params.mode == SecurityMode::Secured {
        slices.set_blindings(|_, _| Scalar::random(rng));
        if let Some(p) = pedersen {
            commitments = Some(commit_slices(&slices, p)?);
        }
    }
    Ok(InitialPreparation {
        announcement,
        occupied,
        payload,
        slices,
        commitments,
    })
}

/// True when the decoded slot still holds exactly what we announced.
pub fn own_announcement_intact(
    slots: &[SlotContent],
    own: &OwnAnnouncement,
    sealed: Option<&[SealedSeed]>,
) -> bool {
    match slots.get(own.slot).and_then(SlotContent::announcement) {
        Some(a) => a.r == own.r && a.length == own.length && sealed.map_or(true, |s| a.seeds == s),
        None => false,
    }
}

/// Public attack evidence in a decoded initial round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Indicator {
    /// More slots occupied than participants.
    OccupancyExceeded {
        occupied: usize,
    },
    LengthCapExceeded {
        slot: usize,
    },
    MalformedSlot {
        slot: usize,
    },
}

pub fn validate_announcements(slots: &[SlotContent], k: usize, length_cap: u16) -> Vec<Indicator> {
    let mut out = Vec::new();
    let occupied = slots.iter().filter(|s| !s.is_empty()).count();
    if occupied > k {
        out.push(Indicator::OccupancyExceeded { occupied });
    }
    for (slot, s) in slots.iter().enumerate() {
        match s {
            SlotContent::Announcement(a) if a.length > length_cap => {
                out.push(Indicator::LengthCapExceeded { slot })
            }
            SlotContent::Malformed => out.push(Indicator::MalformedSlot { slot }),
            _ => {}
        }
    }
    out
}

/// Smallest identifier width in bits that keeps the chance of any of the
/// k(k−1)/2 member pairs drawing the same identifier below `p`:
/// `⌈log2(1 / (1 − (1 − p)^(2 / (k(k−1)))))⌉`.
pub fn identifier_min_bits(p: f64, k: usize) -> u32 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    assert!(k >= 2, "group needs two members");
    let pairs = (k * (k - 1)) as f64 / 2.0;
    // 1 − (1 − p)^(1/pairs), computed without cancellation
    let q = -((-p).ln_1p() / pairs).exp_m1();
    let bits = (1.0 / q).log2();
    // Guard against representation error right at an integer boundary.
    let rounded = bits.round();
    if (bits - rounded).abs() < 1e-12 {
        rounded as u32
    } else {
        bits.ceil() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SealKeyPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys(k: usize, rng: &mut ChaCha20Rng) -> (Vec<SealKeyPair>, Vec<SealPublicKey>) {
        let kp: Vec<SealKeyPair> = (0..k).map(|_| SealKeyPair::generate(rng)).collect();
        let pks = kp.iter().map(SealKeyPair::public).collect();
        (kp, pks)
    }

    #[test]
    fn slot_widths() {
        assert_eq!(InitParams::new(4, SecurityMode::Unsecured).slot_width(), 4);
        // 4 + 4·80 = 324 → 11 blocks
        assert_eq!(InitParams::new(4, SecurityMode::Secured).slot_width(), 341);
        assert_eq!(
            InitParams::new(24, SecurityMode::Secured).slot_width(),
            63 * 31
        );
    }

    #[test]
    fn non_sender_prepares_zeros() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let params = InitParams::new(4, SecurityMode::Unsecured);
        let prep = prepare_initial(&[], SlotChoice::Random, &params, &[], None, &mut rng).unwrap();
        assert_eq!(prep.payload, Payload::Bytes(vec![0; 32]));
        assert!(prep.slices.recombine().is_zero());
        let slots = decode_initial_result(&prep.payload, &params).unwrap();
        assert_eq!(slots, vec![SlotContent::Empty; 8]);
    }

    #[test]
    fn sender_announces_with_seeds() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (kp, pks) = keys(4, &mut rng);
        let params = InitParams::new(4, SecurityMode::Secured);
        let prep = prepare_initial(
            &[InitialEntry::Message { length: 512 }],
            SlotChoice::Random,
            &params,
            &pks,
            None,
            &mut rng,
        )
        .unwrap();
        let own = prep.announcement.clone().unwrap();
        let slots = decode_initial_result(&prep.slices.recombine(), &params).unwrap();
        let anns: Vec<_> = slots.iter().filter_map(SlotContent::announcement).collect();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].length, 512);
        assert!(anns[0].r >= R_MIN);
        assert_eq!(anns[0].seeds.len(), 4);
        for (i, s) in anns[0].seeds.iter().enumerate() {
            assert_eq!(kp[i].open(s).unwrap(), own.seeds[i]);
        }
        assert!(own_announcement_intact(&slots, &own, Some(&anns[0].seeds)));
    }

    #[test]
    fn cap_is_enforced_before_anything_is_sent() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let params = InitParams::new(3, SecurityMode::Unsecured).with_length_cap(100);
        let err = prepare_initial(
            &[InitialEntry::Message { length: 101 }],
            SlotChoice::Random,
            &params,
            &[],
            None,
            &mut rng,
        );
        assert_eq!(
            err.unwrap_err(),
            InitError::LengthCapExceeded {
                length: 101,
                cap: 100
            }
        );
    }

    #[test]
    fn fixed_slot_is_used() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let params = InitParams::new(3, SecurityMode::Unsecured);
        let prep = prepare_initial(
            &[InitialEntry::Message { length: 9 }, InitialEntry::Report],
            SlotChoice::Fixed(5),
            &params,
            &[],
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(prep.announcement.unwrap().slot, 5);
        assert_ne!(prep.occupied[1].0, 5);
        let slots = decode_initial_result(&prep.payload, &params).unwrap();
        assert_eq!(slots[prep.occupied[1].0], SlotContent::Report);
    }

    #[test]
    fn zero_identifier_with_length_is_malformed() {
        let params = InitParams::new(2, SecurityMode::Unsecured);
        assert_eq!(decode_slot(&[0, 0, 0, 5], &params), SlotContent::Malformed);
        assert_eq!(decode_slot(&[0, 9, 0, 0], &params), SlotContent::Malformed);
        assert_eq!(decode_slot(&[0, 1, 0, 0], &params), SlotContent::Report);
    }

    #[test]
    fn indicators() {
        let ann = |l| {
            SlotContent::Announcement(LengthAnnouncement {
                r: 7,
                length: l,
                seeds: vec![],
            })
        };
        let mut slots = vec![SlotContent::Empty; 8];
        assert!(validate_announcements(&slots, 4, u16::MAX).is_empty());
        for s in slots.iter_mut().take(4) {
            *s = ann(10);
        }
        assert!(validate_announcements(&slots, 4, u16::MAX).is_empty());
        slots[4] = ann(10);
        assert_eq!(
            validate_announcements(&slots, 4, u16::MAX),
            vec![Indicator::OccupancyExceeded { occupied: 5 }]
        );

        let one = vec![ann(65535), SlotContent::Empty];
        assert!(validate_announcements(&one, 1, 65535).is_empty());
        assert_eq!(
            validate_announcements(&one, 1, 4096),
            vec![Indicator::LengthCapExceeded { slot: 0 }]
        );
        assert_eq!(
            validate_announcements(&[SlotContent::Malformed, SlotContent::Empty], 1, 10),
            vec![Indicator::MalformedSlot { slot: 0 }]
        );
    }

    #[test]
    fn identifier_bits() {
        // High-precision values: 6.64386, 8.22400, 12.12860, 15.93583, 16.01600, 16.89520
        assert_eq!(identifier_min_bits(0.01, 2), 7);
        assert_eq!(identifier_min_bits(0.01, 3), 9);
        assert_eq!(identifier_min_bits(0.01, 10), 13);
        assert_eq!(identifier_min_bits(0.01, 36), 16);
        assert_eq!(identifier_min_bits(0.01, 37), 17);
        assert_eq!(identifier_min_bits(0.01, 50), 17);
        let mut prev = 0;
        for k in 2..200 {
            let b = identifier_min_bits(0.01, k);
            assert!(b >= prev);
            prev = b;
        }
    }
}
