//! Shared vocabulary: parameters, pseudonyms, shares, simulation time and the
//! per-user encounter logs, plus window eviction.

use rand::{CryptoRng, Rng, RngCore};

use crate::crypto::{ctr_prg, Seed};

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Usable payload of a BLE advertisement frame.
pub const BLE_PAYLOAD_BYTES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("share value {0} outside 0..=15")]
    ShareRange(u8),
    #[error("truncated {what}: need {need} bytes, have {have}")]
    Truncated {
        what: &'static str,
        need: usize,
        have: usize,
    },
}

/// Global protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Transmission distance in meters.
    pub contact_distance_x: f64,
    /// Minimum exposure duration in seconds.
    pub contact_duration_s: u32,
    /// Days an encounter stays relevant.
    pub window_n: u32,
    /// Pseudonym rotation period in minutes.
    pub period_t: u32,
    pub share_bits: u8,
    pub uid_bits: u16,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            contact_distance_x: 2.0,
            contact_duration_s: 900,
            window_n: 14,
            period_t: 30,
            share_bits: 4,
            uid_bits: 128,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.window_n < 1 {
            return Err(ModelError::Params("window_n must be at least 1".into()));
        }
        if self.period_t == 0 || 1440 % self.period_t != 0 {
            return Err(ModelError::Params(format!(
                "period_t = {} does not divide a day",
                self.period_t
            )));
        }
        if self.share_bits != 4 || self.uid_bits != 128 {
            return Err(ModelError::Params(
                "only 4-bit shares and 128-bit uids are supported".into(),
            ));
        }
        if !(self.contact_distance_x.is_finite() && self.contact_distance_x > 0.0) {
            return Err(ModelError::Params("contact_distance_x must be positive".into()));
        }
        Ok(())
    }

    pub fn period_secs(&self) -> u64 {
        u64::from(self.period_t) * 60
    }

    pub fn periods_per_day(&self) -> u64 {
        1440 / u64::from(self.period_t)
    }

    /// Whether something stamped `then` is still inside the window at `now`.
    /// Ages are counted in whole days; age `window_n` is already expired.
    pub fn in_window(&self, then: Timestamp, now: Timestamp) -> bool {
        now.day().saturating_sub(then.day()) < u64::from(self.window_n)
    }

    /// First day still inside the window on `day`.
    pub fn window_start_day(&self, day: u64) -> u64 {
        (day + 1).saturating_sub(u64::from(self.window_n))
    }
}

/// 128-bit rotating pseudonym. Wire form: 16 bytes big-endian.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Uid([u8; 16]);

impl Uid {
    pub const LEN: usize = 16;

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut b = [0u8; 16];
        rng.fill_bytes(&mut b);
        Uid(b)
    }

    /// `ctr_prg(seed, period, 128)`.
    pub fn derive(seed: &Seed, period: TimePeriod) -> Self {
        let bits = ctr_prg(seed, period.0, 128).expect("128 bits is in range");
        Uid(bits.as_bytes().try_into().expect("16 bytes"))
    }

    pub const fn from_bytes(b: [u8; 16]) -> Self {
        Uid(b)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        Some(Uid(v.try_into().ok()?))
    }
}

impl std::fmt::Debug for Uid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Uid({})", &self.to_hex()[..8])
    }
}

impl std::fmt::Display for Uid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// 4-bit one-time secret. Serialized as one byte with a zero high nibble.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Share(u8);

impl Share {
    pub const MAX: u8 = 15;

    pub fn new(value: u8) -> Result<Self, ModelError> {
        if value > Self::MAX {
            return Err(ModelError::ShareRange(value));
        }
        Ok(Share(value))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Share(rng.gen_range(0..=Self::MAX))
    }

    /// Uniform over the fifteen values other than `self`.
    pub fn random_other<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let v = rng.gen_range(0..Self::MAX);
        Share(if v >= self.0 { v + 1 } else { v })
    }

    pub fn value(&self) -> u8 {
        self.0
    }
}

/// Index of a rotation period counted from the scenario epoch.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TimePeriod(pub u64);

/// Simulation-relative seconds. Wire form: 8-byte big-endian seconds.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const LEN: usize = 8;

    pub fn secs(&self) -> u64 {
        self.0
    }

    pub fn day(&self) -> u64 {
        self.0 / SECONDS_PER_DAY
    }

    pub fn period(&self, params: &Params) -> TimePeriod {
        TimePeriod(self.0 / params.period_secs())
    }

    pub fn start_of_day(day: u64) -> Self {
        Timestamp(day * SECONDS_PER_DAY)
    }
}

/// Anything stamped with an encounter time.
pub trait Timed {
    fn time(&self) -> Timestamp;
}

/// Set-protocol encounter log entry: what was received, what was sent, when.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ContactRecord {
    pub peer_uid: Uid,
    pub peer_share: Share,
    pub own_uid: Uid,
    pub own_share: Share,
    pub time: Timestamp,
}

impl ContactRecord {
    pub const WIRE_LEN: usize = 16 + 1 + 16 + 1 + 8;

    pub fn encode(&self) -> [u8; Self::WIRE_LEN] {
        let mut out = [0u8; Self::WIRE_LEN];
        out[..16].copy_from_slice(self.peer_uid.as_bytes());
        out[16] = self.peer_share.value();
        out[17..33].copy_from_slice(self.own_uid.as_bytes());
        out[33] = self.own_share.value();
        out[34..].copy_from_slice(&self.time.0.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < Self::WIRE_LEN {
            return Err(ModelError::Truncated {
                what: "contact record",
                need: Self::WIRE_LEN,
                have: bytes.len(),
            });
        }
        Ok(ContactRecord {
            peer_uid: Uid(bytes[..16].try_into().expect("16")),
            peer_share: Share::new(bytes[16])?,
            own_uid: Uid(bytes[17..33].try_into().expect("16")),
            own_share: Share::new(bytes[33])?,
            time: Timestamp(u64::from_be_bytes(bytes[34..42].try_into().expect("8"))),
        })
    }
}

impl Timed for ContactRecord {
    fn time(&self) -> Timestamp {
        self.time
    }
}

/// Message-protocol encounter log entry.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SeenUid {
    pub uid: Uid,
    pub time: Timestamp,
}

impl SeenUid {
    pub const WIRE_LEN: usize = 16 + 8;

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.uid.as_bytes());
        out.extend_from_slice(&self.time.0.to_be_bytes());
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < Self::WIRE_LEN {
            return Err(ModelError::Truncated {
                what: "seen uid",
                need: Self::WIRE_LEN,
                have: bytes.len(),
            });
        }
        Ok(SeenUid {
            uid: Uid(bytes[..16].try_into().expect("16")),
            time: Timestamp(u64::from_be_bytes(bytes[16..24].try_into().expect("8"))),
        })
    }
}

impl Timed for SeenUid {
    fn time(&self) -> Timestamp {
        self.time
    }
}

/// Drops every record whose age in whole days has reached the window,
/// keeping the survivors in their original order.
pub fn evict_expired<T: Timed>(records: &mut Vec<T>, now: Timestamp, params: &Params) {
    records.retain(|r| params.in_window(r.time(), now));
}

/// BLE advertisement body: the uid, optionally followed by the share byte.
pub fn beacon_payload(uid: &Uid, share: Option<Share>) -> Vec<u8> {
    let mut out = uid.as_bytes().to_vec();
    if let Some(s) = share {
        out.push(s.value());
    }
    debug_assert!(out.len() <= BLE_PAYLOAD_BYTES);
    out
}
