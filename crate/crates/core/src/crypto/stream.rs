use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Scalar, Seed};

/// Keyed PRF from a seed and a counter to a scalar: ChaCha20 keystream block
/// number `index` under key `seed`, all 64 bytes reduced modulo q.
pub fn blinding_stream(seed: &Seed, index: u32) -> Scalar {
    let mut rng = ChaCha20Rng::from_seed(seed.0);
    // 16 words per 64-byte block
    rng.set_word_pos(u128::from(index) * 16);
    let mut block = [0u8; 64];
    rng.fill_bytes(&mut block);
    Scalar::from_wide_bytes(&block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn deterministic() {
        let s = Seed([9; 32]);
        assert_eq!(blinding_stream(&s, 0), blinding_stream(&s, 0));
        assert_eq!(blinding_stream(&s, u32::MAX), blinding_stream(&s, u32::MAX));
        assert_ne!(blinding_stream(&s, 0), blinding_stream(&s, 1));
    }

    #[test]
    fn distinct_seeds_disagree() {
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        for _ in 0..100 {
            let a = Seed::random(&mut rng);
            let b = Seed::random(&mut rng);
            assert_ne!(blinding_stream(&a, 0), blinding_stream(&b, 0));
        }
    }

    #[test]
    fn index_selects_keystream_block() {
        // Block 3 of a sequential read equals direct access to index 3.
        let s = Seed([1; 32]);
        let mut rng = ChaCha20Rng::from_seed(s.0);
        let mut buf = [0u8; 64 * 4];
        rng.fill_bytes(&mut buf);
        let expected = Scalar::from_wide_bytes(buf[192..].try_into().unwrap());
        assert_eq!(blinding_stream(&s, 3), expected);
    }
}
