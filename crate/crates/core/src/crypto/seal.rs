use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::CryptoError;

/// Length of a sealed seed: ephemeral key 32 ‖ tag 16 ‖ ciphertext 32.
pub const CT_LEN: usize = 80;

const SEAL_DST: &[u8] = b"dcnet/seal/ephemeral/v1";

/// A 32-byte secret from which blinding streams are derived.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        Seed(b)
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

/// A seed sealed to one recipient.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SealedSeed(pub [u8; CT_LEN]);

impl fmt::Debug for SealedSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SealedSeed({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SealPublicKey(pub [u8; 32]);

impl fmt::Debug for SealPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SealPublicKey({:02x}{:02x}{:02x}{:02x}..)",
            self.0[0], self.0[1], self.0[2], self.0[3]
        )
    }
}

#[derive(Clone)]
pub struct SealKeyPair {
    secret: crypto_box::SecretKey,
    public: SealPublicKey,
}

impl SealKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::from_secret_bytes(crypto_box::SecretKey::generate(rng).to_bytes())
    }

    pub fn from_secret_bytes(bytes: [u8; 32]) -> Self {
        let secret = crypto_box::SecretKey::from_bytes(bytes);
        let public = SealPublicKey(secret.public_key().to_bytes());
        SealKeyPair { secret, public }
    }

    pub fn public(&self) -> SealPublicKey {
        self.public
    }

    pub fn open(&self, sealed: &SealedSeed) -> Result<Seed, CryptoError> {
        open(self, sealed)
    }
}

impl fmt::Debug for SealKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SealKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Anonymous public-key encryption of a seed (X25519 sealed box).
///
/// The ephemeral key is derived from the recipient and the seed, so sealing is
/// deterministic. Anyone who is later shown the seed can re-seal it and compare
/// with the published ciphertext; seeds are uniform 256-bit values so the
/// determinism reveals nothing else.
pub fn seal(recipient: &SealPublicKey, seed: &Seed) -> SealedSeed {
    let ephemeral_seed: [u8; 32] = Sha256::new()
        .chain_update(SEAL_DST)
        .chain_update(recipient.0)
        .chain_update(seed.0)
        .finalize()
        .into();
    let mut rng = ChaCha20Rng::from_seed(ephemeral_seed);
    let pk = crypto_box::PublicKey::from_bytes(recipient.0);
    let ct = pk
        .seal(&mut rng, &seed.0)
        .expect("sealing a 32-byte message cannot fail");
    SealedSeed(ct.try_into().expect("sealed box of 32 bytes is 80 bytes"))
}

pub fn open(keys: &SealKeyPair, sealed: &SealedSeed) -> Result<Seed, CryptoError> {
    let pt = keys
        .secret
        .unseal(&sealed.0)
        .map_err(|_| CryptoError::Authentication)?;
    let bytes: [u8; 32] = pt.try_into().map_err(|_| CryptoError::Authentication)?;
    Ok(Seed(bytes))
}
