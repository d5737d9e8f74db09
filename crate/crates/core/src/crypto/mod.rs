//! Commitment group arithmetic, Pedersen commitments, blinding streams and
//! seed sealing.

mod block;
mod group;
mod pedersen;
mod scalar;
mod seal;
mod stream;

pub use block::{blocks_for, embed_block, embed_bytes, extract_block, extract_bytes, BLOCK_LEN};
pub use group::{GroupBackend, GroupElement, ELEMENT_LEN};
pub use pedersen::{
    commit, derive_generator_h, verify_commitment, Commitment, Pedersen, GENERATOR_H_DST,
};
pub use scalar::Scalar;
pub use seal::{open, seal, SealKeyPair, SealPublicKey, SealedSeed, Seed, CT_LEN};
pub use stream::blinding_stream;

/// Wire width of an encoded scalar.
pub const SCALAR_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("ciphertext failed authentication")]
    Authentication,
    #[error("invalid group element or scalar encoding")]
    InvalidEncoding,
    #[error("scalar does not fit in a 31-byte block")]
    BlockOverflow,
}
