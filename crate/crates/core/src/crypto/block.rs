use super::{CryptoError, Scalar};

/// Payload bytes carried by one scalar: the largest whole-byte width below the
/// 256-bit group order.
pub const BLOCK_LEN: usize = 31;

/// Big-endian interpretation of 31 bytes; always `< 2^248 < q`.
pub fn embed_block(bytes: &[u8; BLOCK_LEN]) -> Scalar {
    let mut wide = [0u8; 32];
    wide[1..].copy_from_slice(bytes);
    Scalar::from_bytes(&wide).expect("values below 2^248 are canonical")
}

/// Inverse of [`embed_block`]. A scalar `>= 2^248` cannot come from honest
/// embeddings and signals a corrupted or colliding block.
pub fn extract_block(s: &Scalar) -> Result<[u8; BLOCK_LEN], CryptoError> {
    let bytes = s.to_bytes();
    if bytes[0] != 0 {
        return Err(CryptoError::BlockOverflow);
    }
    Ok(bytes[1..].try_into().expect("31 bytes"))
}

/// Number of blocks needed for `len` payload bytes.
pub fn blocks_for(len: usize) -> usize {
    len.div_ceil(BLOCK_LEN)
}

/// Embeds a byte string block by block, zero-padding the tail of the last one.
pub fn embed_bytes(bytes: &[u8]) -> Vec<Scalar> {
    bytes
        .chunks(BLOCK_LEN)
        .map(|chunk| {
            let mut b = [0u8; BLOCK_LEN];
            b[..chunk.len()].copy_from_slice(chunk);
            embed_block(&b)
        })
        .collect()
}

/// Extracts every block and concatenates; the caller truncates padding.
/// Fails on the first block that does not decode.
pub fn extract_bytes(blocks: &[Scalar]) -> Result<Vec<u8>, CryptoError> {
    let mut out = Vec::with_capacity(blocks.len() * BLOCK_LEN);
    for b in blocks {
        out.extend_from_slice(&extract_block(b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_embeds_to_zero() {
        assert_eq!(embed_block(&[0; BLOCK_LEN]), Scalar::ZERO);
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        for _ in 0..1000 {
            let mut b = [0u8; BLOCK_LEN];
            rng.fill_bytes(&mut b);
            assert_eq!(extract_block(&embed_block(&b)).unwrap(), b);
        }
    }

    #[test]
    fn big_endian() {
        let mut b = [0u8; BLOCK_LEN];
        b[30] = 1;
        b[29] = 2;
        assert_eq!(embed_block(&b), Scalar::from_u64(0x0201));
    }

    #[test]
    fn overflow_rejected() {
        assert_eq!(
            extract_block(&-Scalar::ONE),
            Err(CryptoError::BlockOverflow)
        );
        let mut top = [0u8; 32];
        top[0] = 1; // exactly 2^248
        assert_eq!(
            extract_block(&Scalar::from_bytes(&top).unwrap()),
            Err(CryptoError::BlockOverflow)
        );
        assert!(extract_block(&(Scalar::from_bytes(&top).unwrap() - Scalar::ONE)).is_ok());
    }

    #[test]
    fn byte_strings_pad_the_tail() {
        let bytes: Vec<u8> = (0..40).collect();
        let blocks = embed_bytes(&bytes);
        assert_eq!(blocks.len(), blocks_for(40));
        assert_eq!(blocks.len(), 2);
        let back = extract_bytes(&blocks).unwrap();
        assert_eq!(&back[..40], &bytes[..]);
        assert!(back[40..].iter().all(|b| *b == 0));
    }
}
