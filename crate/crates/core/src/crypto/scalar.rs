use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use k256::elliptic_curve::bigint::{U256, U512};
use k256::elliptic_curve::ff::{Field, PrimeField};
use k256::elliptic_curve::ops::Reduce;
use k256::FieldBytes;
use rand::{CryptoRng, RngCore};

/// An integer modulo the group order q, used both as commitment exponent and
/// as the DC-net arithmetic domain of secured rounds.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Scalar(pub(crate) k256::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(k256::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(k256::Scalar::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(k256::Scalar::from(v))
    }

    /// Uniform over `[0, q)`.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Scalar(k256::Scalar::random(rng))
    }

    /// Canonical 32-byte big-endian encoding.
    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes().into()
    }

    /// Parses a canonical encoding; values `>= q` are rejected.
    pub fn from_bytes(bytes: &[u8; 32]) -> Option<Self> {
        Option::from(k256::Scalar::from_repr(FieldBytes::from(*bytes))).map(Scalar)
    }

    /// Interprets 32 big-endian bytes and reduces modulo q.
    pub fn from_bytes_reduced(bytes: &[u8; 32]) -> Self {
        Scalar(<k256::Scalar as Reduce<U256>>::reduce(U256::from_be_slice(
            bytes,
        )))
    }

    /// Interprets 64 big-endian bytes and reduces modulo q. The bias is
    /// below 2^-256, so this is how uniform scalars are drawn from byte streams.
    pub fn from_wide_bytes(bytes: &[u8; 64]) -> Self {
        Scalar(<k256::Scalar as Reduce<U512>>::reduce(U512::from_be_slice(
            bytes,
        )))
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar(")?;
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        Scalar::from_u64(v)
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl AddAssign for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        self.0 += rhs.0;
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl SubAssign for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        self.0 -= rhs.0;
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Scalar> for Scalar {
    fn sum<I: Iterator<Item = &'a Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |a, b| a + *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const ORDER_BE: [u8; 32] = [
        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
        0xfe, 0xba, 0xae, 0xdc, 0xe6, 0xaf, 0x48, 0xa0, 0x3b, 0xbf, 0xd2, 0x5e, 0x8c, 0xd0, 0x36,
        0x41, 0x41,
    ];

    #[test]
    fn encoding_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = Scalar::random(&mut rng);
            assert_eq!(Scalar::from_bytes(&s.to_bytes()), Some(s));
        }
        assert_eq!(Scalar::from_u64(258).to_bytes()[30..], [1, 2]);
    }

    #[test]
    fn order_is_not_canonical() {
        assert_eq!(Scalar::from_bytes(&ORDER_BE), None);
        assert_eq!(Scalar::from_bytes_reduced(&ORDER_BE), Scalar::ZERO);
    }

    #[test]
    fn wide_reduction_matches_modular_arithmetic() {
        // 2^256 mod q == 2^256 - q
        let mut wide = [0u8; 64];
        wide[31] = 1;
        let two_256 = Scalar::from_wide_bytes(&wide);
        let mut pow = Scalar::ONE;
        for _ in 0..256 {
            pow = pow + pow;
        }
        assert_eq!(two_256, pow);
    }

    #[test]
    fn negation() {
        let x = Scalar::from_u64(5);
        assert_eq!(x + (-x), Scalar::ZERO);
        assert_eq!(Scalar::ZERO - Scalar::ONE, -Scalar::ONE);
    }
}
