//! Paillier additively homomorphic encryption.
//!
//! Uses the `g = n + 1` variant, so `g^m mod n^2 = 1 + m*n` and encryption is
//! `c = (1 + m*n) * r^n mod n^2`. Decryption goes through the CRT with the
//! prime factors held by the secret key.
//!
//! Every ciphertext carries the 4-byte [`KeyId`] of the key it was produced
//! under; combining ciphertexts from different keys is a
//! [`CryptoError::KeyBinding`] error rather than silent garbage.
//!
//! Serialized forms:
//! - body: big-endian `n^2` residue, fixed width `2 * modulus_bits / 8` bytes
//! - framed: `key_id (4) || body`

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::prime::random_prime;
use super::CryptoError;

pub const SUPPORTED_MODULUS_BITS: [usize; 4] = [512, 1024, 2048, 3072];
pub const DEFAULT_MODULUS_BITS: usize = 2048;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct KeyId(pub u32);

impl std::fmt::Display for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AhePublicKey {
    n: BigUint,
    n_squared: BigUint,
    modulus_bits: usize,
    key_id: KeyId,
}

#[derive(Clone)]
pub struct AheSecretKey {
    public: AhePublicKey,
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    h_p: BigUint,
    h_q: BigUint,
    q_inv_p: BigUint,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AheCiphertext {
    value: BigUint,
    key_id: KeyId,
}

/// Generates a fresh key pair with an `modulus_bits`-bit modulus.
pub fn ahe_keygen<R: RngCore + CryptoRng>(
    modulus_bits: usize,
    rng: &mut R,
) -> Result<(AhePublicKey, AheSecretKey), CryptoError> {
    if !SUPPORTED_MODULUS_BITS.contains(&modulus_bits) {
        return Err(CryptoError::Parameter(format!(
            "unsupported modulus size {modulus_bits}; expected one of {SUPPORTED_MODULUS_BITS:?}"
        )));
    }
    let half = (modulus_bits / 2) as u64;
    loop {
        let p = random_prime(half, rng);
        let q = random_prime(half, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        if !n.gcd(&phi).is_one() {
            continue;
        }
        debug_assert_eq!(n.bits() as usize, modulus_bits);
        let public = AhePublicKey::from_modulus(n)?;
        let secret = AheSecretKey::from_primes(public.clone(), p, q)?;
        return Ok((public, secret));
    }
}

impl AhePublicKey {
    /// Rebuilds a public key from its modulus. The bit length must be one of
    /// [`SUPPORTED_MODULUS_BITS`].
    pub fn from_modulus(n: BigUint) -> Result<Self, CryptoError> {
        let modulus_bits = n.bits() as usize;
        if !SUPPORTED_MODULUS_BITS.contains(&modulus_bits) || n.is_even() {
            return Err(CryptoError::Parameter(format!(
                "modulus of {modulus_bits} bits is not a valid key"
            )));
        }
        let digest = Sha256::digest(n.to_bytes_be());
        let key_id = KeyId(u32::from_be_bytes(digest[..4].try_into().expect("4 bytes")));
        Ok(AhePublicKey {
            n_squared: &n * &n,
            n,
            modulus_bits,
            key_id,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_bits(&self) -> usize {
        self.modulus_bits
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    /// Width of a serialized ciphertext body in bytes.
    pub fn ciphertext_len(&self) -> usize {
        2 * self.modulus_bits / 8
    }

    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<AheCiphertext, CryptoError> {
        if *m >= self.n {
            return Err(CryptoError::Parameter("plaintext not below the modulus".into()));
        }
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let value = (gm * self.random_mask(rng)) % &self.n_squared;
        Ok(self.wrap(value))
    }

    pub fn encrypt_u64<R: RngCore + CryptoRng>(
        &self,
        m: u64,
        rng: &mut R,
    ) -> Result<AheCiphertext, CryptoError> {
        self.encrypt(&BigUint::from(m), rng)
    }

    /// Encryption of `m0 + m1 mod n`.
    pub fn add(&self, c0: &AheCiphertext, c1: &AheCiphertext) -> Result<AheCiphertext, CryptoError> {
        self.check(c0)?;
        self.check(c1)?;
        Ok(self.wrap((&c0.value * &c1.value) % &self.n_squared))
    }

    /// Encryption of `k * m mod n`.
    pub fn scalar_mul(&self, c: &AheCiphertext, k: &BigUint) -> Result<AheCiphertext, CryptoError> {
        self.check(c)?;
        if *k >= self.n {
            return Err(CryptoError::Parameter("scalar not below the modulus".into()));
        }
        Ok(self.wrap(c.value.modpow(k, &self.n_squared)))
    }

    /// Encryption of `m0 - m1 mod n`.
    pub fn sub(&self, c0: &AheCiphertext, c1: &AheCiphertext) -> Result<AheCiphertext, CryptoError> {
        self.check(c0)?;
        self.check(c1)?;
        let inv = mod_inverse(&c1.value, &self.n_squared)
            .ok_or_else(|| CryptoError::Malformed("ciphertext not invertible".into()))?;
        Ok(self.wrap((&c0.value * inv) % &self.n_squared))
    }

    /// Encryption of `r * (m0 - m1) mod n` for a fresh `r` uniform in
    /// `[1, n - 1]`: zero exactly when the plaintexts match (up to the
    /// negligible chance that `r` shares a factor with `n`), and a uniformly
    /// blinded nonzero value otherwise.
    ///
    /// The randomness of the result comes from `c0` and `c1` raised to `r`;
    /// when the decryptor also produced both inputs, follow with
    /// [`rerandomize`](Self::rerandomize).
    pub fn blinded_difference<R: RngCore + CryptoRng>(
        &self,
        c0: &AheCiphertext,
        c1: &AheCiphertext,
        rng: &mut R,
    ) -> Result<AheCiphertext, CryptoError> {
        let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
        let diff = self.sub(c0, c1)?;
        self.scalar_mul(&diff, &r)
    }

    /// Multiplies in a fresh encryption of zero.
    pub fn rerandomize<R: RngCore + CryptoRng>(
        &self,
        c: &AheCiphertext,
        rng: &mut R,
    ) -> Result<AheCiphertext, CryptoError> {
        self.check(c)?;
        Ok(self.wrap((&c.value * self.random_mask(rng)) % &self.n_squared))
    }

    /// Parses a bare ciphertext body produced under this key.
    pub fn ciphertext_from_body(&self, body: &[u8]) -> Result<AheCiphertext, CryptoError> {
        if body.len() != self.ciphertext_len() {
            return Err(CryptoError::Malformed(format!(
                "ciphertext body is {} bytes, expected {}",
                body.len(),
                self.ciphertext_len()
            )));
        }
        let value = BigUint::from_bytes_be(body);
        if value.is_zero() || value >= self.n_squared || !value.gcd(&self.n).is_one() {
            return Err(CryptoError::Malformed("value outside the ciphertext group".into()));
        }
        Ok(self.wrap(value))
    }

    /// Parses a framed ciphertext (`key_id || body`), rejecting other keys.
    pub fn decode_ciphertext(&self, framed: &[u8]) -> Result<AheCiphertext, CryptoError> {
        if framed.len() < 4 {
            return Err(CryptoError::Malformed("missing key id".into()));
        }
        let found = KeyId(u32::from_be_bytes(framed[..4].try_into().expect("4 bytes")));
        if found != self.key_id {
            return Err(CryptoError::KeyBinding {
                expected: self.key_id,
                found,
            });
        }
        self.ciphertext_from_body(&framed[4..])
    }

    fn random_mask<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r.modpow(&self.n, &self.n_squared);
            }
        }
    }

    fn wrap(&self, value: BigUint) -> AheCiphertext {
        AheCiphertext {
            value,
            key_id: self.key_id,
        }
    }

    fn check(&self, c: &AheCiphertext) -> Result<(), CryptoError> {
        if c.key_id != self.key_id {
            return Err(CryptoError::KeyBinding {
                expected: self.key_id,
                found: c.key_id,
            });
        }
        Ok(())
    }
}

impl AheSecretKey {
    fn from_primes(public: AhePublicKey, p: BigUint, q: BigUint) -> Result<Self, CryptoError> {
        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let h_p = Self::h_factor(&public.n, &p, &p_squared)?;
        let h_q = Self::h_factor(&public.n, &q, &q_squared)?;
        let q_inv_p = mod_inverse(&q, &p)
            .ok_or_else(|| CryptoError::Parameter("factors are not coprime".into()))?;
        Ok(AheSecretKey {
            public,
            p,
            q,
            p_squared,
            q_squared,
            h_p,
            h_q,
            q_inv_p,
        })
    }

    // h = L_p(g^(p-1) mod p^2)^-1 mod p, with g = n + 1.
    fn h_factor(n: &BigUint, p: &BigUint, p_squared: &BigUint) -> Result<BigUint, CryptoError> {
        let g = n + 1u32;
        let x = g.modpow(&(p - 1u32), p_squared);
        let l = (x - 1u32) / p;
        mod_inverse(&(l % p), p).ok_or_else(|| CryptoError::Parameter("degenerate key".into()))
    }

    pub fn public_key(&self) -> &AhePublicKey {
        &self.public
    }

    pub fn decrypt(&self, c: &AheCiphertext) -> Result<BigUint, CryptoError> {
        self.public.check(c)?;
        let m_p = Self::decrypt_mod(&c.value, &self.p, &self.p_squared, &self.h_p);
        let m_q = Self::decrypt_mod(&c.value, &self.q, &self.q_squared, &self.h_q);
        // Garner: m = m_q + q * ((m_p - m_q) * q^-1 mod p)
        let diff = (&m_p + &self.p - (&m_q % &self.p)) % &self.p;
        let t = (diff * &self.q_inv_p) % &self.p;
        Ok(m_q + &self.q * t)
    }

    /// Convenience for the share-sized plaintexts used by the protocols.
    pub fn decrypt_is_zero(&self, c: &AheCiphertext) -> Result<bool, CryptoError> {
        Ok(self.decrypt(c)?.is_zero())
    }

    fn decrypt_mod(c: &BigUint, p: &BigUint, p_squared: &BigUint, h: &BigUint) -> BigUint {
        let x = (c % p_squared).modpow(&(p - 1u32), p_squared);
        let l = (x - 1u32) / p;
        (l * h) % p
    }
}

impl std::fmt::Debug for AheSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AheSecretKey")
            .field("key_id", &self.public.key_id)
            .finish_non_exhaustive()
    }
}

impl AheCiphertext {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    /// Fixed-width big-endian body, `2 * modulus_bits / 8` bytes.
    pub fn to_body(&self, pk: &AhePublicKey) -> Vec<u8> {
        let width = pk.ciphertext_len();
        let raw = self.value.to_bytes_be();
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    /// `key_id || body`.
    pub fn encode(&self, pk: &AhePublicKey) -> Vec<u8> {
        let mut out = self.key_id.0.to_be_bytes().to_vec();
        out.extend(self.to_body(pk));
        out
    }
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m = BigInt::from(m.clone());
    let e = a.extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    let mut x = e.x % &m;
    if x.is_negative() {
        x += &m;
    }
    x.to_biguint()
}
