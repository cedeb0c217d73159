use rand::{CryptoRng, Rng, RngCore};

use super::{mask_payload, MessageError, Payload, PayloadKind};
use crate::crypto::{PkePublicKey, Seed};
use crate::model::{evict_expired, Params, SeenUid, TimePeriod, Timestamp, Uid};

/// `pke(pk_G, s || t)`, opaque to the relay.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SetupBlob(Vec<u8>);

impl SetupBlob {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        SetupBlob(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// `pke(pk_G, count(4) || count * (uid(16) || timestamp(8)))`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DiagnosisSubmission(Vec<u8>);

impl DiagnosisSubmission {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        DiagnosisSubmission(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Received {
    Real(Payload),
    Dummy,
}

pub struct UserMsgState {
    seed_s: Seed,
    seed_t: Seed,
    grace_pk: PkePublicKey,
    seen: Vec<SeenUid>,
    expected_counter: u64,
    inbox: Vec<Payload>,
}

impl UserMsgState {
    /// Fresh seeds plus the blob to hand to the relay.
    pub fn user_setup<R: RngCore + CryptoRng>(
        rng: &mut R,
        grace_pk: PkePublicKey,
    ) -> Result<(Self, SetupBlob), MessageError> {
        let seed_s = Seed::random(rng);
        let seed_t = Seed::random(rng);
        let mut plain = [0u8; 32];
        plain[..16].copy_from_slice(seed_s.as_bytes());
        plain[16..].copy_from_slice(seed_t.as_bytes());
        let blob = grace_pk.encrypt(&plain, rng)?;
        let state = UserMsgState {
            seed_s,
            seed_t,
            grace_pk,
            seen: Vec::new(),
            expected_counter: 0,
            inbox: Vec::new(),
        };
        Ok((state, SetupBlob(blob)))
    }

    pub fn derive_current_uid(&self, period: TimePeriod) -> Uid {
        Uid::derive(&self.seed_s, period)
    }

    pub fn record_beacon(&mut self, uid: Uid, now: Timestamp, params: &Params) {
        self.seen.push(SeenUid { uid, time: now });
        evict_expired(&mut self.seen, now, params);
    }

    /// Encrypts the live seen set for Grace. With `pad_to`, random uids are
    /// appended until the submission holds `pad_to` entries.
    pub fn submit_diagnosis<R: RngCore + CryptoRng>(
        &mut self,
        now: Timestamp,
        params: &Params,
        pad_to: Option<usize>,
        rng: &mut R,
    ) -> Result<DiagnosisSubmission, MessageError> {
        evict_expired(&mut self.seen, now, params);
        let mut entries = self.seen.clone();
        if let Some(target) = pad_to {
            let earliest = Timestamp::start_of_day(params.window_start_day(now.day())).secs();
            while entries.len() < target {
                entries.push(SeenUid {
                    uid: Uid::random(rng),
                    time: Timestamp(rng.gen_range(earliest..=now.secs())),
                });
            }
        }
        let plain = encode_seen_set(&entries);
        Ok(DiagnosisSubmission(self.grace_pk.encrypt(&plain, rng)?))
    }

    /// Accepts only counters strictly above the last accepted one.
    pub fn user_receive(
        &mut self,
        counter: u64,
        masked_payload: &[u8; 8],
    ) -> Result<Received, MessageError> {
        if counter <= self.expected_counter {
            return Err(MessageError::Replay {
                received: counter,
                expected: self.expected_counter,
            });
        }
        let payload = Payload::decode(&mask_payload(&self.seed_t, counter, masked_payload))?;
        self.expected_counter = counter;
        Ok(match payload.kind {
            PayloadKind::Real => {
                self.inbox.push(payload);
                Received::Real(payload)
            }
            PayloadKind::Dummy => Received::Dummy,
        })
    }

    pub fn seen(&self) -> &[SeenUid] {
        &self.seen
    }

    pub fn inbox(&self) -> &[Payload] {
        &self.inbox
    }

    pub fn expected_counter(&self) -> u64 {
        self.expected_counter
    }
}

impl std::fmt::Debug for UserMsgState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UserMsgState")
            .field("seen", &self.seen.len())
            .field("expected_counter", &self.expected_counter)
            .field("inbox", &self.inbox.len())
            .finish_non_exhaustive()
    }
}

pub(crate) fn encode_seen_set(entries: &[SeenUid]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + entries.len() * SeenUid::WIRE_LEN);
    out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
    for e in entries {
        e.encode_into(&mut out);
    }
    out
}

pub(crate) fn decode_seen_set(bytes: &[u8]) -> Result<Vec<SeenUid>, MessageError> {
    if bytes.len() < 4 {
        return Err(MessageError::MalformedSubmission);
    }
    let count = u32::from_be_bytes(bytes[..4].try_into().expect("4")) as usize;
    let body = &bytes[4..];
    if body.len() != count * SeenUid::WIRE_LEN {
        return Err(MessageError::MalformedSubmission);
    }
    body.chunks_exact(SeenUid::WIRE_LEN)
        .map(|c| SeenUid::decode(c).map_err(|_| MessageError::MalformedSubmission))
        .collect()
}
