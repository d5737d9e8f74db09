use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use k256::elliptic_curve::group::Group;
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::{AffinePoint, EncodedPoint, ProjectivePoint};

use super::{CryptoError, Scalar};

/// Wire width of an encoded group element.
pub const ELEMENT_LEN: usize = 33;

/// Tag byte that marks a [`GroupBackend::Linear`] element on the wire. SEC1
/// compressed points start with 0x02 or 0x03, so it cannot clash.
const LINEAR_TAG: u8 = 0xff;

/// Which prime-order group carries the commitments.
///
/// `Secp256k1` is the real thing. `Linear` is the additive group Z_q itself,
/// with the same order and wire size but trivially computable discrete logs:
/// commitments in it are neither hiding nor binding. It exists so that the
/// simulator can run very large secured experiments, whose simulated time comes
/// from the cost model anyway, without spending minutes on curve arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum GroupBackend {
    #[default]
    Secp256k1,
    Linear,
}

/// An element of the commitment group, including the identity.
#[derive(Clone, Copy)]
pub struct GroupElement(pub(crate) Repr);

#[derive(Clone, Copy)]
pub(crate) enum Repr {
    Identity,
    Point(ProjectivePoint),
    Linear(k256::Scalar),
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement(Repr::Identity);

    pub(crate) fn from_point(p: ProjectivePoint) -> Self {
        if bool::from(p.is_identity()) {
            GroupElement(Repr::Identity)
        } else {
            GroupElement(Repr::Point(p))
        }
    }

    pub(crate) fn from_linear(s: k256::Scalar) -> Self {
        if s == k256::Scalar::ZERO {
            GroupElement(Repr::Identity)
        } else {
            GroupElement(Repr::Linear(s))
        }
    }

    /// The standard secp256k1 base point.
    pub fn secp_generator() -> Self {
        GroupElement::from_point(ProjectivePoint::GENERATOR)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.0, Repr::Identity)
    }

    /// Scalar multiplication by double-and-add; slow path, the commitment
    /// hot path uses fixed-base tables.
    pub fn mul(&self, k: &Scalar) -> Self {
        match self.0 {
            Repr::Identity => GroupElement::IDENTITY,
            Repr::Point(p) => GroupElement::from_point(p * k.0),
            Repr::Linear(s) => GroupElement::from_linear(s * k.0),
        }
    }

    /// 33-byte encoding: SEC1 compressed point, 33 zero bytes for the
    /// identity, or `0xff ‖ scalar` for a linear-backend element.
    pub fn to_bytes(&self) -> [u8; ELEMENT_LEN] {
        let mut out = [0u8; ELEMENT_LEN];
        match self.0 {
            Repr::Identity => {}
            Repr::Point(p) => {
                out.copy_from_slice(p.to_affine().to_encoded_point(true).as_bytes());
            }
            Repr::Linear(s) => {
                out[0] = LINEAR_TAG;
                out[1..].copy_from_slice(&s.to_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; ELEMENT_LEN]) -> Result<Self, CryptoError> {
        match bytes[0] {
            0 if bytes.iter().all(|b| *b == 0) => Ok(GroupElement::IDENTITY),
            LINEAR_TAG => {
                let s = Scalar::from_bytes(bytes[1..].try_into().expect("32 bytes"))
                    .ok_or(CryptoError::InvalidEncoding)?;
                if s.is_zero() {
                    return Err(CryptoError::InvalidEncoding);
                }
                Ok(GroupElement::from_linear(s.0))
            }
            0x02 | 0x03 => {
                let ep =
                    EncodedPoint::from_bytes(bytes).map_err(|_| CryptoError::InvalidEncoding)?;
                let affine: Option<AffinePoint> = AffinePoint::from_encoded_point(&ep).into();
                let affine = affine.ok_or(CryptoError::InvalidEncoding)?;
                Ok(GroupElement::from_point(ProjectivePoint::from(affine)))
            }
            _ => Err(CryptoError::InvalidEncoding),
        }
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Identity, Repr::Identity) => true,
            (Repr::Point(a), Repr::Point(b)) => a == b,
            (Repr::Linear(a), Repr::Linear(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for GroupElement {}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement(")?;
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

impl Add for GroupElement {
    type Output = GroupElement;

    fn add(self, rhs: GroupElement) -> GroupElement {
        match (self.0, rhs.0) {
            (Repr::Identity, _) => rhs,
            (_, Repr::Identity) => self,
            (Repr::Point(a), Repr::Point(b)) => GroupElement::from_point(a + b),
            (Repr::Linear(a), Repr::Linear(b)) => GroupElement::from_linear(a + b),
            _ => panic!("cannot add elements of different group backends"),
        }
    }
}

impl AddAssign for GroupElement {
    fn add_assign(&mut self, rhs: GroupElement) {
        *self = *self + rhs;
    }
}

impl Sum for GroupElement {
    fn sum<I: Iterator<Item = GroupElement>>(iter: I) -> GroupElement {
        iter.fold(GroupElement::IDENTITY, |a, b| a + b)
    }
}

const WINDOW_BITS: usize = 8;
const WINDOWS: usize = 256 / WINDOW_BITS;

/// Precomputed multiples `d · 256^i · B` for every byte position `i` and digit
/// `d`, so a fixed-base multiplication is 32 table lookups and additions.
pub(crate) struct FixedBaseTable {
    windows: Vec<[ProjectivePoint; 1 << WINDOW_BITS]>,
}

impl FixedBaseTable {
    pub(crate) fn new(base: ProjectivePoint) -> Self {
        let mut windows = Vec::with_capacity(WINDOWS);
        let mut b = base;
        for _ in 0..WINDOWS {
            let mut row = [ProjectivePoint::IDENTITY; 1 << WINDOW_BITS];
            for d in 1..row.len() {
                row[d] = row[d - 1] + b;
            }
            // 256 · b
            b = row[255] + b;
            windows.push(row);
        }
        FixedBaseTable { windows }
    }

    /// Accumulates `k · B` into `acc`.
    pub(crate) fn mul_into(&self, k: &Scalar, acc: &mut ProjectivePoint) {
        let bytes = k.to_bytes();
        for (i, row) in self.windows.iter().enumerate() {
            let digit = bytes[31 - i] as usize;
            if digit != 0 {
                *acc += row[digit];
            }
        }
    }
}
