//! Share-based protocol with homomorphic infection learning.
//!
//! Stage 1: users swap `(uid, share)` at each encounter. Stage 2: every day a
//! user reports `(own_uid, indicator)` for the encounters in the window, where
//! the indicator equals the share sent iff the user is infected. Stage 3: the
//! user sends `(peer_uid, enc(peer_share))` for the same encounters and the
//! government returns `enc(r * (peer_share - indicator))`; a zero decryption
//! is an exposure.

mod gov;
mod user;

pub use gov::{graph_to_text, EntryDiagnostic, GovState, GraphEdge, RespondOutcome};
pub use user::{encounter_exchange, RiskReport, UserSetState};

use crate::crypto::{AheCiphertext, AhePublicKey, CryptoError, KeyId};
use crate::model::{Share, Uid};
use num_bigint::BigUint;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetError {
    #[error("status update for day {day} is stale on day {today}")]
    Stale { day: u64, today: u64 },
    #[error("response bound to key {found}, expected {expected}")]
    KeyBinding { expected: KeyId, found: KeyId },
    #[error("response index {index} outside a query of {len} entries")]
    IndexOutOfRange { index: u32, len: usize },
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Transport-level handle tying a user's daily update to the query sent on
/// the same connection.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SessionId(pub u64);

/// Wire: `day(4) || count(4) || count * (uid(16) || indicator(1))`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StatusUpdate {
    pub day: u64,
    pub entries: Vec<(Uid, Share)>,
}

impl StatusUpdate {
    pub const ENTRY_LEN: usize = Uid::LEN + 1;

    pub fn wire_len(&self) -> usize {
        8 + self.entries.len() * Self::ENTRY_LEN
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.day as u32).to_be_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for (uid, share) in &self.entries {
            out.extend_from_slice(uid.as_bytes());
            out.push(share.value());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SetError> {
        if bytes.len() < 8 {
            return Err(SetError::Malformed("status update header"));
        }
        let day = u64::from(u32::from_be_bytes(bytes[..4].try_into().expect("4")));
        let count = u32::from_be_bytes(bytes[4..8].try_into().expect("4")) as usize;
        let body = &bytes[8..];
        if body.len() != count * Self::ENTRY_LEN {
            return Err(SetError::Malformed("status update length"));
        }
        let entries = body
            .chunks_exact(Self::ENTRY_LEN)
            .map(|c| {
                let uid = Uid::from_bytes(c[..16].try_into().expect("16"));
                Share::new(c[16])
                    .map(|s| (uid, s))
                    .map_err(|_| SetError::Malformed("indicator"))
            })
            .collect::<Result<_, _>>()?;
        Ok(StatusUpdate { day, entries })
    }
}

/// One query line. A body that failed group validation on decode keeps its
/// slot so later indices stay aligned.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QueryEntry {
    pub peer_uid: Uid,
    pub enc_share: Result<AheCiphertext, CryptoError>,
}

/// Wire: `modulus_bits(2) || n || count(4) || count * (uid(16) || body)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InfectionQuery {
    pub pk: AhePublicKey,
    pub entries: Vec<QueryEntry>,
}

impl InfectionQuery {
    pub fn ciphertext_payload_len(&self) -> usize {
        self.entries.len() * self.pk.ciphertext_len()
    }

    pub fn wire_len(&self) -> usize {
        2 + self.pk.modulus_bits() / 8 + 4 + self.entries.len() * (Uid::LEN + self.pk.ciphertext_len())
    }

    pub fn encode(&self) -> Vec<u8> {
        let width = self.pk.modulus_bits() / 8;
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.pk.modulus_bits() as u16).to_be_bytes());
        let n = self.pk.modulus().to_bytes_be();
        out.resize(out.len() + width - n.len(), 0);
        out.extend_from_slice(&n);
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for e in &self.entries {
            out.extend_from_slice(e.peer_uid.as_bytes());
            match &e.enc_share {
                Ok(c) => out.extend_from_slice(&c.to_body(&self.pk)),
                Err(_) => out.resize(out.len() + self.pk.ciphertext_len(), 0),
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SetError> {
        if bytes.len() < 2 {
            return Err(SetError::Malformed("query header"));
        }
        let bits = usize::from(u16::from_be_bytes([bytes[0], bytes[1]]));
        let width = bits / 8;
        if bytes.len() < 2 + width + 4 {
            return Err(SetError::Malformed("query header"));
        }
        let pk = AhePublicKey::from_modulus(BigUint::from_bytes_be(&bytes[2..2 + width]))?;
        if pk.modulus_bits() != bits {
            return Err(SetError::Malformed("query modulus size"));
        }
        let count = u32::from_be_bytes(bytes[2 + width..6 + width].try_into().expect("4")) as usize;
        let body = &bytes[6 + width..];
        let stride = Uid::LEN + pk.ciphertext_len();
        if body.len() != count * stride {
            return Err(SetError::Malformed("query length"));
        }
        let entries = body
            .chunks_exact(stride)
            .map(|c| QueryEntry {
                peer_uid: Uid::from_bytes(c[..16].try_into().expect("16")),
                enc_share: pk.ciphertext_from_body(&c[16..]),
            })
            .collect();
        Ok(InfectionQuery { pk, entries })
    }
}

/// Government reply: `(query index, enc(r * (share - indicator)))` in query
/// order, only for peers with a live status.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct InfectionResponse {
    pub entries: Vec<(u32, AheCiphertext)>,
}

impl InfectionResponse {
    /// `count(4) || count * (index(4) || key_id(4) || body)`.
    pub fn wire_len(&self, pk: &AhePublicKey) -> usize {
        4 + self.entries.len() * (4 + 4 + pk.ciphertext_len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ahe_keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn status_update_wire() {
        let upd = StatusUpdate {
            day: 3,
            entries: (0..100u8).map(|i| (Uid::from_bytes([i; 16]), Share::new(i % 16).unwrap())).collect(),
        };
        let bytes = upd.encode();
        assert_eq!(bytes.len(), 8 + 1700);
        assert_eq!(StatusUpdate::decode(&bytes).unwrap(), upd);
        let mut bad = bytes.clone();
        bad[8 + 16] = 16;
        assert_eq!(StatusUpdate::decode(&bad), Err(SetError::Malformed("indicator")));
        assert!(StatusUpdate::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn query_wire_keeps_malformed_slots() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (pk, sk) = ahe_keygen(512, &mut rng).unwrap();
        let entries = (0..3u8)
            .map(|i| QueryEntry {
                peer_uid: Uid::from_bytes([i; 16]),
                enc_share: pk.encrypt_u64(u64::from(i), &mut rng),
            })
            .collect();
        let q = InfectionQuery { pk: pk.clone(), entries };
        let mut bytes = q.encode();
        assert_eq!(bytes.len(), q.wire_len());
        assert_eq!(InfectionQuery::decode(&bytes).unwrap(), q);

        let second_body = 2 + 64 + 4 + (16 + 128) + 16;
        bytes[second_body..second_body + 128].fill(0);
        let d = InfectionQuery::decode(&bytes).unwrap();
        assert!(d.entries[0].enc_share.is_ok());
        assert!(d.entries[1].enc_share.is_err());
        assert_eq!(sk.decrypt(d.entries[2].enc_share.as_ref().unwrap()).unwrap(), BigUint::from(2u8));
    }
}
