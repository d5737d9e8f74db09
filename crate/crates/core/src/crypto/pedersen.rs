use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::sync::OnceLock;

use k256::elliptic_curve::sec1::FromEncodedPoint;
use k256::{AffinePoint, EncodedPoint, ProjectivePoint};
use sha2::{Digest, Sha256};

use super::group::{FixedBaseTable, GroupBackend, GroupElement, ELEMENT_LEN};
use super::{CryptoError, Scalar};

/// Domain-separation string hashed to the second generator.
pub const GENERATOR_H_DST: &[u8] = b"dcnet/pedersen/generator-h/v1";

/// `blinding · H + value · G`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Commitment(pub GroupElement);

impl Commitment {
    pub const IDENTITY: Commitment = Commitment(GroupElement::IDENTITY);

    pub fn to_bytes(&self) -> [u8; ELEMENT_LEN] {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8; ELEMENT_LEN]) -> Result<Self, CryptoError> {
        GroupElement::from_bytes(bytes).map(Commitment)
    }
}

impl fmt::Debug for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Commitment({:?})", self.0)
    }
}

impl Add for Commitment {
    type Output = Commitment;
    fn add(self, rhs: Commitment) -> Commitment {
        Commitment(self.0 + rhs.0)
    }
}

impl AddAssign for Commitment {
    fn add_assign(&mut self, rhs: Commitment) {
        self.0 += rhs.0;
    }
}

impl Sum for Commitment {
    fn sum<I: Iterator<Item = Commitment>>(iter: I) -> Commitment {
        iter.fold(Commitment::IDENTITY, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Commitment> for Commitment {
    fn sum<I: Iterator<Item = &'a Commitment>>(iter: I) -> Commitment {
        iter.fold(Commitment::IDENTITY, |a, b| a + *b)
    }
}

/// Hashes [`GENERATOR_H_DST`] to a secp256k1 point by try-and-increment:
/// `x = SHA-256(dst ‖ counter_be32)` for counter = 0, 1, ..., taking the first
/// `x` that is a valid field element with a curve point, and the even `y`.
/// Nobody knows log_G(H).
pub fn derive_generator_h() -> GroupElement {
    let (_, h) = hash_to_curve(GENERATOR_H_DST);
    h
}

fn hash_to_curve(dst: &[u8]) -> (u32, GroupElement) {
    for counter in 0u32.. {
        let digest = Sha256::new()
            .chain_update(dst)
            .chain_update(counter.to_be_bytes())
            .finalize();
        let mut sec1 = [0u8; 33];
        sec1[0] = 0x02;
        sec1[1..].copy_from_slice(&digest);
        let Ok(ep) = EncodedPoint::from_bytes(sec1) else {
            continue;
        };
        let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&ep).into();
        if let Some(p) = affine {
            return (counter, GroupElement::from_point(ProjectivePoint::from(p)));
        }
    }
    unreachable!("counter space exhausted")
}

struct SecpTables {
    g: FixedBaseTable,
    h: FixedBaseTable,
    h_elem: GroupElement,
}

fn secp_tables() -> &'static SecpTables {
    static TABLES: OnceLock<SecpTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let h_elem = derive_generator_h();
        let h_point = match h_elem.0 {
            super::group::Repr::Point(p) => p,
            _ => unreachable!("hash-to-curve yields a proper point"),
        };
        SecpTables {
            g: FixedBaseTable::new(ProjectivePoint::GENERATOR),
            h: FixedBaseTable::new(h_point),
            h_elem,
        }
    })
}

fn linear_h() -> k256::Scalar {
    static H: OnceLock<k256::Scalar> = OnceLock::new();
    *H.get_or_init(|| {
        let digest = Sha256::new()
            .chain_update(GENERATOR_H_DST)
            .chain_update(b"/linear")
            .finalize();
        let s = Scalar::from_bytes_reduced(&digest.into());
        assert!(!s.is_zero());
        s.0
    })
}

/// Commitment context for one group backend. Cheap to clone; the generator
/// tables are built once per process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pedersen {
    backend: GroupBackend,
}

impl Pedersen {
    pub fn new(backend: GroupBackend) -> Self {
        if backend == GroupBackend::Secp256k1 {
            secp_tables();
        }
        Pedersen { backend }
    }

    pub fn backend(&self) -> GroupBackend {
        self.backend
    }

    pub fn generator_g(&self) -> GroupElement {
        match self.backend {
            GroupBackend::Secp256k1 => GroupElement::secp_generator(),
            GroupBackend::Linear => GroupElement::from_linear(k256::Scalar::ONE),
        }
    }

    pub fn generator_h(&self) -> GroupElement {
        match self.backend {
            GroupBackend::Secp256k1 => secp_tables().h_elem,
            GroupBackend::Linear => GroupElement::from_linear(linear_h()),
        }
    }

    pub fn commit(&self, value: &Scalar, blinding: &Scalar) -> Commitment {
        match self.backend {
            GroupBackend::Secp256k1 => {
                let t = secp_tables();
                let mut acc = ProjectivePoint::IDENTITY;
                t.g.mul_into(value, &mut acc);
                t.h.mul_into(blinding, &mut acc);
                Commitment(GroupElement::from_point(acc))
            }
            GroupBackend::Linear => {
                Commitment(GroupElement::from_linear(blinding.0 * linear_h() + value.0))
            }
        }
    }

    pub fn verify(&self, c: &Commitment, value: &Scalar, blinding: &Scalar) -> bool {
        self.commit(value, blinding) == *c
    }
}

/// `blinding · H + value · G` on the default backend.
pub fn commit(value: &Scalar, blinding: &Scalar) -> Commitment {
    Pedersen::default().commit(value, blinding)
}

pub fn verify_commitment(c: &Commitment, value: &Scalar, blinding: &Scalar) -> bool {
    Pedersen::default().verify(c, value, blinding)
}
