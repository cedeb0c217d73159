//! Randomized public-key encryption for setup and diagnosis blobs.
//!
//! Hybrid construction: an ephemeral X25519 agreement with the recipient's
//! static key, HKDF-SHA256 to derive a ChaCha20-Poly1305 key and nonce, then
//! AEAD over the payload. Wire layout:
//!
//! ```text
//! ephemeral_public (32) || aead_ciphertext (len(plaintext)) || tag (16)
//! ```
//!
//! Ciphertext length is a function of plaintext length only.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use super::CryptoError;

/// Bytes added to every plaintext.
pub const PKE_OVERHEAD: usize = 32 + 16;

/// Largest plaintext accepted by `encrypt`.
pub const PKE_MAX_PLAINTEXT: usize = 64 << 20;

const KDF_INFO: &[u8] = b"contact-trace pke v1";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PkePublicKey([u8; 32]);

impl PkePublicKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        PkePublicKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        plaintext: &[u8],
        rng: &mut R,
    ) -> Result<Vec<u8>, CryptoError> {
        if plaintext.len() > PKE_MAX_PLAINTEXT {
            return Err(CryptoError::Parameter(format!(
                "plaintext of {} bytes exceeds {PKE_MAX_PLAINTEXT}",
                plaintext.len()
            )));
        }
        let ephemeral = StaticSecret::random_from_rng(&mut *rng);
        let ephemeral_public = PublicKey::from(&ephemeral);
        let shared = ephemeral.diffie_hellman(&PublicKey::from(self.0));
        let aead = derive_aead(shared.as_bytes(), ephemeral_public.as_bytes(), &self.0);
        let body = aead
            .0
            .encrypt(
                &aead.1,
                Payload {
                    msg: plaintext,
                    aad: ephemeral_public.as_bytes(),
                },
            )
            .map_err(|_| CryptoError::Parameter("aead encryption failed".into()))?;
        let mut out = Vec::with_capacity(PKE_OVERHEAD + plaintext.len());
        out.extend_from_slice(ephemeral_public.as_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }
}

pub struct PkeKeyPair {
    public: PkePublicKey,
    secret: StaticSecret,
}

impl PkeKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = StaticSecret::random_from_rng(rng);
        let public = PkePublicKey(PublicKey::from(&secret).to_bytes());
        PkeKeyPair { public, secret }
    }

    pub fn public_key(&self) -> PkePublicKey {
        self.public
    }

    /// Fails with [`CryptoError::Decryption`] on truncated input, a foreign
    /// key, or any modification of the blob.
    pub fn decrypt(&self, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
        if blob.len() < PKE_OVERHEAD {
            return Err(CryptoError::Decryption);
        }
        let (eph, body) = blob.split_at(32);
        let eph: [u8; 32] = eph.try_into().expect("split at 32");
        let shared = self.secret.diffie_hellman(&PublicKey::from(eph));
        let aead = derive_aead(shared.as_bytes(), &eph, &self.public.0);
        aead.0
            .decrypt(&aead.1, Payload { msg: body, aad: &eph })
            .map_err(|_| CryptoError::Decryption)
    }
}

impl std::fmt::Debug for PkeKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PkeKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

fn derive_aead(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> (ChaCha20Poly1305, Nonce) {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 44];
    hk.expand(KDF_INFO, &mut okm).expect("44 bytes is a valid HKDF length");
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&okm[..32]));
    (cipher, *Nonce::from_slice(&okm[32..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip_random_32_byte_messages() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = PkeKeyPair::generate(&mut rng);
        for _ in 0..100 {
            let mut m = [0u8; 32];
            rng.fill_bytes(&mut m);
            let ct = kp.public_key().encrypt(&m, &mut rng).unwrap();
            assert_eq!(ct.len(), 32 + PKE_OVERHEAD);
            assert_eq!(kp.decrypt(&ct).unwrap(), m);
        }
    }

    #[test]
    fn randomized_and_length_preserving() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = PkeKeyPair::generate(&mut rng);
        let a = kp.public_key().encrypt(b"same message", &mut rng).unwrap();
        let b = kp.public_key().encrypt(b"same message", &mut rng).unwrap();
        assert_ne!(a, b);
        let c = kp.public_key().encrypt(b"other  bytes", &mut rng).unwrap();
        assert_eq!(a.len(), c.len());
    }

    #[test]
    fn foreign_key_and_tampering_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = PkeKeyPair::generate(&mut rng);
        let other = PkeKeyPair::generate(&mut rng);
        let mut ct = kp.public_key().encrypt(&[7u8; 64], &mut rng).unwrap();
        assert_eq!(other.decrypt(&ct), Err(CryptoError::Decryption));
        ct[40] ^= 1;
        assert_eq!(kp.decrypt(&ct), Err(CryptoError::Decryption));
        assert_eq!(kp.decrypt(&ct[..10]), Err(CryptoError::Decryption));
    }

    #[test]
    fn empty_and_long_payloads() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = PkeKeyPair::generate(&mut rng);
        let ct = kp.public_key().encrypt(&[], &mut rng).unwrap();
        assert_eq!(kp.decrypt(&ct).unwrap(), Vec::<u8>::new());
        let long = vec![0xabu8; 40_000];
        let ct = kp.public_key().encrypt(&long, &mut rng).unwrap();
        assert_eq!(kp.decrypt(&ct).unwrap(), long);
    }
}
