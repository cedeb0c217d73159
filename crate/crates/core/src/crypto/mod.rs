//! Cryptographic building blocks: the counter-mode PRG used for pseudonym
//! rotation and masking, the hybrid public-key scheme for setup and
//! diagnosis blobs, and Paillier for the encrypted equality test.

mod paillier;
mod pke;
mod prg;
mod prime;

pub use paillier::{
    ahe_keygen, AheCiphertext, AhePublicKey, AheSecretKey, KeyId, DEFAULT_MODULUS_BITS,
    SUPPORTED_MODULUS_BITS,
};
pub use pke::{PkeKeyPair, PkePublicKey, PKE_MAX_PLAINTEXT, PKE_OVERHEAD};
pub use prg::{ctr_prg, xor_mask, BitString, Seed, MAX_PRG_BITS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("ciphertext bound to key {found}, expected {expected}")]
    KeyBinding { expected: KeyId, found: KeyId },
    #[error("decryption failed")]
    Decryption,
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
}
