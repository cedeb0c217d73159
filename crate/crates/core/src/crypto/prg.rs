//! Counter-mode pseudorandom generator and XOR masking.
//!
//! `ctr_prg(seed, counter, bits)` is AES-128 keyed by the seed, evaluated on
//! the 16-byte blocks `counter_be64 || block_index_be64` for
//! `block_index = 0, 1, ...`, concatenated and truncated to `bits` bits
//! (most significant bit first). Distinct `(seed, counter)` pairs never share
//! an input block, so their outputs are independent under the PRF assumption.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::{CryptoRng, RngCore};

use super::CryptoError;

/// Upper bound on a single `ctr_prg` request, in bits.
pub const MAX_PRG_BITS: usize = 1 << 20;

/// 128-bit secret seed. Serialized as its 16 raw bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; 16]);

impl Seed {
    pub const LEN: usize = 16;

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        Seed(bytes)
    }

    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Seed(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Seed(..)")
    }
}

/// A bit string of arbitrary length. Bits are packed MSB-first; unused low
/// bits of the final byte are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    /// Takes the first `len` bits of `bytes`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, CryptoError> {
        if len > bytes.len() * 8 {
            return Err(CryptoError::Parameter(format!(
                "{len} bits requested from {} bytes",
                bytes.len()
            )));
        }
        let mut bytes = bytes[..len.div_ceil(8)].to_vec();
        clear_tail(&mut bytes, len);
        Ok(BitString { bytes, len })
    }

    /// Whole-byte convenience constructor.
    pub fn from_byte_vec(bytes: Vec<u8>) -> Self {
        let len = bytes.len() * 8;
        BitString { bytes, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index out of range");
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString({}:{})", self.len, hex::encode(&self.bytes))
    }
}

fn clear_tail(bytes: &mut [u8], len: usize) {
    let rem = len % 8;
    if rem != 0 {
        if let Some(last) = bytes.last_mut() {
            *last &= 0xffu8 << (8 - rem);
        }
    }
}

/// Deterministic counter-mode expansion of `seed` at position `counter`.
pub fn ctr_prg(seed: &Seed, counter: u64, out_bits: usize) -> Result<BitString, CryptoError> {
    if out_bits == 0 || out_bits > MAX_PRG_BITS {
        return Err(CryptoError::Parameter(format!(
            "ctr_prg output length {out_bits} outside 1..={MAX_PRG_BITS}"
        )));
    }
    let cipher = Aes128::new(GenericArray::from_slice(seed.as_bytes()));
    let n_blocks = out_bits.div_ceil(128);
    let mut out = Vec::with_capacity(n_blocks * 16);
    for index in 0..n_blocks as u64 {
        let mut block = [0u8; 16];
        block[..8].copy_from_slice(&counter.to_be_bytes());
        block[8..].copy_from_slice(&index.to_be_bytes());
        let mut block = GenericArray::from(block);
        cipher.encrypt_block(&mut block);
        out.extend_from_slice(&block);
    }
    out.truncate(out_bits.div_ceil(8));
    clear_tail(&mut out, out_bits);
    Ok(BitString {
        bytes: out,
        len: out_bits,
    })
}

/// Bitwise XOR of two equal-length bit strings.
pub fn xor_mask(mask: &BitString, msg: &BitString) -> Result<BitString, CryptoError> {
    if mask.len != msg.len {
        return Err(CryptoError::Parameter(format!(
            "mask is {} bits, message is {} bits",
            mask.len, msg.len
        )));
    }
    let bytes = mask
        .bytes
        .iter()
        .zip(&msg.bytes)
        .map(|(a, b)| a ^ b)
        .collect();
    Ok(BitString {
        bytes,
        len: msg.len,
    })
}
