use dcnet_core::crypto::{
    commit, derive_generator_h, verify_commitment, Commitment, GroupBackend, Pedersen, Scalar,
    GENERATOR_H_DST,
};
use num_bigint::BigUint;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

/// Textbook affine secp256k1 arithmetic over num-bigint, independent of k256.
mod oracle {
    use super::*;

    pub fn p() -> BigUint {
        BigUint::parse_bytes(
            b"fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f",
            16,
        )
        .unwrap()
    }

    pub type Pt = Option<(BigUint, BigUint)>;

    fn inv(a: &BigUint) -> BigUint {
        a.modpow(&(p() - 2u32), &p())
    }

    fn sub(a: &BigUint, b: &BigUint) -> BigUint {
        let p = p();
        ((a + &p) - (b % &p)) % &p
    }

    pub fn add(a: &Pt, b: &Pt) -> Pt {
        let p = p();
        match (a, b) {
            (None, x) | (x, None) => x.clone(),
            (Some((x1, y1)), Some((x2, y2))) => {
                if x1 == x2 && (y1 + y2) % &p == BigUint::from(0u32) {
                    return None;
                }
                let lambda = if x1 == x2 {
                    (BigUint::from(3u32) * x1 * x1) % &p * inv(&((BigUint::from(2u32) * y1) % &p))
                        % &p
                } else {
                    sub(y2, y1) * inv(&sub(x2, x1)) % &p
                };
                let x3 = sub(&sub(&(&lambda * &lambda % &p), x1), x2);
                let y3 = sub(&(&lambda * sub(x1, &x3) % &p), y1);
                Some((x3, y3))
            }
        }
    }

    pub fn mul(k: &BigUint, pt: &Pt) -> Pt {
        let mut acc: Pt = None;
        for i in (0..k.bits()).rev() {
            acc = add(&acc, &acc);
            if k.bit(i) {
                acc = add(&acc, pt);
            }
        }
        acc
    }

    pub fn g() -> Pt {
        Some((
            BigUint::parse_bytes(
                b"79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798",
                16,
            )
            .unwrap(),
            BigUint::parse_bytes(
                b"483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8",
                16,
            )
            .unwrap(),
        ))
    }

    pub fn hash_to_curve(dst: &[u8]) -> Pt {
        let p = p();
        for ctr in 0u32.. {
            let x = BigUint::from_bytes_be(
                &Sha256::new()
                    .chain_update(dst)
                    .chain_update(ctr.to_be_bytes())
                    .finalize(),
            );
            if x >= p {
                continue;
            }
            let rhs = (&x * &x * &x + 7u32) % &p;
            let y = rhs.modpow(&((&p + 1u32) / 4u32), &p);
            if &y * &y % &p != rhs {
                continue;
            }
            let y = if y.bit(0) { &p - y } else { y };
            return Some((x, y));
        }
        unreachable!()
    }

    pub fn compress(pt: &Pt) -> [u8; 33] {
        let mut out = [0u8; 33];
        if let Some((x, y)) = pt {
            out[0] = if y.bit(0) { 3 } else { 2 };
            let xb = x.to_bytes_be();
            out[33 - xb.len()..].copy_from_slice(&xb);
        }
        out
    }
}

fn scalar_to_big(s: &Scalar) -> BigUint {
    BigUint::from_bytes_be(&s.to_bytes())
}

#[test]
fn generator_h_matches_bigint_oracle() {
    let h = oracle::hash_to_curve(GENERATOR_H_DST);
    assert_eq!(derive_generator_h().to_bytes(), oracle::compress(&h));
}

#[test]
fn commit_matches_bigint_oracle() {
    let h = oracle::hash_to_curve(GENERATOR_H_DST);
    let g = oracle::g();
    let expect = oracle::add(
        &oracle::mul(&BigUint::from(7u32), &h),
        &oracle::mul(&BigUint::from(5u32), &g),
    );
    assert_eq!(
        commit(&Scalar::from_u64(5), &Scalar::from_u64(7)).to_bytes(),
        oracle::compress(&expect)
    );

    let x = -Scalar::from_u64(1234567);
    let r = Scalar::from_bytes_reduced(&[0xa5; 32]);
    let expect = oracle::add(
        &oracle::mul(&scalar_to_big(&r), &h),
        &oracle::mul(&scalar_to_big(&x), &g),
    );
    assert_eq!(commit(&x, &r).to_bytes(), oracle::compress(&expect));
}

fn any_scalar() -> impl Strategy<Value = Scalar> {
    any::<[u8; 32]>().prop_map(|b| Scalar::from_bytes_reduced(&b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn commitments_are_homomorphic(x1 in any_scalar(), r1 in any_scalar(), x2 in any_scalar(), r2 in any_scalar()) {
        let lhs = commit(&x1, &r1) + commit(&x2, &r2);
        prop_assert_eq!(lhs, commit(&(x1 + x2), &(r1 + r2)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn verify_accepts_only_the_opening(x in any_scalar(), r in any_scalar(), x2 in any_scalar(), r2 in any_scalar()) {
        let c = commit(&x, &r);
        prop_assert!(verify_commitment(&c, &x, &r));
        prop_assert!(!verify_commitment(&c, &(x + Scalar::ONE), &r));
        prop_assume!((x2, r2) != (x, r));
        prop_assert!(!verify_commitment(&c, &x2, &r2));
        prop_assert!(!verify_commitment(&c, &x, &r2) || r2 == r);
    }

    #[test]
    fn zero_commitment_needs_its_blinding(r in any_scalar(), r2 in any_scalar()) {
        prop_assume!(r != r2);
        prop_assert!(!verify_commitment(&commit(&Scalar::ZERO, &r), &Scalar::ZERO, &r2));
    }

    #[test]
    fn linear_backend_is_homomorphic(x1 in any_scalar(), r1 in any_scalar(), x2 in any_scalar(), r2 in any_scalar()) {
        let p = Pedersen::new(GroupBackend::Linear);
        prop_assert_eq!(p.commit(&x1, &r1) + p.commit(&x2, &r2), p.commit(&(x1 + x2), &(r1 + r2)));
        prop_assert!(p.verify(&p.commit(&x1, &r1), &x1, &r1));
        prop_assert!(!p.verify(&p.commit(&x1, &r1), &(x1 + Scalar::ONE), &r1));
    }

    #[test]
    fn commitment_encoding_round_trips(x in any_scalar(), r in any_scalar()) {
        for backend in [GroupBackend::Secp256k1, GroupBackend::Linear] {
            let c = Pedersen::new(backend).commit(&x, &r);
            prop_assert_eq!(Commitment::from_bytes(&c.to_bytes()).unwrap(), c);
        }
    }
}
