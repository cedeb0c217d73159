//! Relay-based notification protocols.
//!
//! Parties: the user, a relay (Mary in the first protocol, Henry in the
//! second) that maps identities to 3-byte pseudonyms, the health provider
//! Henry who vouches for diagnoses, and Grace who resolves uploaded uids to
//! pseudonyms and sends masked notifications.
//!
//! A notification travels as `pseudonym || counter || CTR(t, counter) ^ payload`
//! and is the same 19 bytes whether it carries a real exposure or cover.

mod grace;
mod henry;
mod relay;
mod user;

pub use grace::{CoverClock, Grace, GraceRegistration};
pub use henry::{CertifiedDiagnosis, HealthProvider};
pub use relay::{Delivery, ForwardOutcome, Relay, RelayLogEntry, RELAY_BUFFER_SECS};
pub use user::{DiagnosisSubmission, Received, SetupBlob, UserMsgState};

use crate::crypto::{BitString, CryptoError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MessageError {
    #[error("identity {0} is already registered")]
    DuplicateIdentity(Identity),
    #[error("pseudonym {0} is already registered")]
    DuplicatePseudonym(Pseudonym),
    #[error("pseudonym space exhausted")]
    PseudonymSpaceExhausted,
    #[error("unknown pseudonym {0}")]
    UnknownPseudonym(Pseudonym),
    #[error("malformed setup blob")]
    MalformedSetup,
    #[error("malformed diagnosis submission")]
    MalformedSubmission,
    #[error("no confirmed diagnosis for {0}")]
    NotDiagnosed(Identity),
    #[error("counter {received} is not above {expected}")]
    Replay { received: u64, expected: u64 },
    #[error("malformed payload")]
    MalformedPayload,
    #[error("malformed notification")]
    MalformedNotification,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Real-world identity the relay can deliver to (phone number, account id).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identity([u8; 16]);

impl Identity {
    pub const fn from_bytes(b: [u8; 16]) -> Self {
        Identity(b)
    }

    pub fn from_index(i: u64) -> Self {
        let mut b = [0u8; 16];
        b[8..].copy_from_slice(&i.to_be_bytes());
        Identity(b)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Display for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Identity({self})")
    }
}

/// 24-bit relay pseudonym.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pseudonym(u32);

impl Pseudonym {
    pub const LEN: usize = 3;
    pub const SPACE: u32 = 1 << 24;

    pub fn new(value: u32) -> Option<Self> {
        (value < Self::SPACE).then_some(Pseudonym(value))
    }

    pub fn value(&self) -> u32 {
        self.0
    }

    pub fn to_bytes(&self) -> [u8; 3] {
        let b = self.0.to_be_bytes();
        [b[1], b[2], b[3]]
    }

    pub fn from_bytes(b: [u8; 3]) -> Self {
        Pseudonym(u32::from_be_bytes([0, b[0], b[1], b[2]]))
    }
}

impl std::fmt::Display for Pseudonym {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:06x}", self.0)
    }
}

impl std::fmt::Debug for Pseudonym {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Pseudonym({self})")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PayloadKind {
    Real,
    Dummy,
}

/// Fixed 8-byte notification body:
/// `flag(1) || contact_count(2) || last_contact_days_ago(2) || reserved(3)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Payload {
    pub kind: PayloadKind,
    pub contact_count: u16,
    pub last_contact_days_ago: u16,
}

impl Payload {
    pub const LEN: usize = 8;
    pub const BITS: usize = Self::LEN * 8;

    pub const DUMMY: Payload = Payload {
        kind: PayloadKind::Dummy,
        contact_count: 0,
        last_contact_days_ago: 0,
    };

    pub fn encode(&self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[0] = match self.kind {
            PayloadKind::Real => 1,
            PayloadKind::Dummy => 0,
        };
        out[1..3].copy_from_slice(&self.contact_count.to_be_bytes());
        out[3..5].copy_from_slice(&self.last_contact_days_ago.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8; 8]) -> Result<Self, MessageError> {
        let kind = match bytes[0] {
            1 => PayloadKind::Real,
            0 => PayloadKind::Dummy,
            _ => return Err(MessageError::MalformedPayload),
        };
        if bytes[5..] != [0, 0, 0] {
            return Err(MessageError::MalformedPayload);
        }
        Ok(Payload {
            kind,
            contact_count: u16::from_be_bytes([bytes[1], bytes[2]]),
            last_contact_days_ago: u16::from_be_bytes([bytes[3], bytes[4]]),
        })
    }
}

/// `pseudonym(3) || counter(8) || masked_payload(8)`, big-endian.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NotificationMsg {
    pub pseudonym: Pseudonym,
    pub counter: u64,
    pub masked_payload: [u8; 8],
}

impl NotificationMsg {
    pub const WIRE_LEN: usize = Pseudonym::LEN + 8 + Payload::LEN;

    pub fn encode(&self) -> [u8; Self::WIRE_LEN] {
        let mut out = [0u8; Self::WIRE_LEN];
        out[..3].copy_from_slice(&self.pseudonym.to_bytes());
        out[3..11].copy_from_slice(&self.counter.to_be_bytes());
        out[11..].copy_from_slice(&self.masked_payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MessageError> {
        if bytes.len() != Self::WIRE_LEN {
            return Err(MessageError::MalformedNotification);
        }
        Ok(NotificationMsg {
            pseudonym: Pseudonym::from_bytes(bytes[..3].try_into().expect("3")),
            counter: u64::from_be_bytes(bytes[3..11].try_into().expect("8")),
            masked_payload: bytes[11..].try_into().expect("8"),
        })
    }
}

/// XOR of the payload with `CTR(t, counter)` truncated to 64 bits.
pub(crate) fn mask_payload(
    seed_t: &crate::crypto::Seed,
    counter: u64,
    bytes: &[u8; 8],
) -> [u8; 8] {
    let mask = crate::crypto::ctr_prg(seed_t, counter, Payload::BITS).expect("64 bits is in range");
    let masked = crate::crypto::xor_mask(&mask, &BitString::from_byte_vec(bytes.to_vec()))
        .expect("equal lengths");
    masked.as_bytes().try_into().expect("8 bytes")
}
