use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{CryptoRng, Rng, RngCore};
use rand_distr::{Distribution, Exp};

use super::user::decode_seen_set;
use super::{
    mask_payload, CertifiedDiagnosis, MessageError, NotificationMsg, Payload, PayloadKind,
    Pseudonym, SetupBlob,
};
use crate::crypto::{PkeKeyPair, PkePublicKey, Seed};
use crate::model::{Params, TimePeriod, Timestamp, Uid};

/// Grace's per-pseudonym record: both seeds and the last counter used.
#[derive(Clone)]
pub struct GraceRegistration {
    seed_s: Seed,
    seed_t: Seed,
    counter: u64,
}

impl GraceRegistration {
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

/// Exponential inter-arrival sampler for cover traffic.
#[derive(Clone, Copy, Debug)]
pub struct CoverClock {
    mean_secs: f64,
    dist: Exp<f64>,
}

impl CoverClock {
    pub fn new(mean_secs: f64) -> Result<Self, MessageError> {
        if !(mean_secs.is_finite() && mean_secs > 0.0) {
            return Err(crate::crypto::CryptoError::Parameter(format!(
                "cover rate {mean_secs} must be positive"
            ))
            .into());
        }
        Ok(CoverClock {
            mean_secs,
            dist: Exp::new(1.0 / mean_secs).expect("positive rate"),
        })
    }

    pub fn mean_secs(&self) -> f64 {
        self.mean_secs
    }

    pub fn next_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

pub struct Grace {
    keys: PkeKeyPair,
    params: Params,
    registry: BTreeMap<Pseudonym, GraceRegistration>,
    uid_lookup: HashMap<Uid, (Pseudonym, TimePeriod)>,
    lookup_days: BTreeMap<u64, Vec<Uid>>,
    current_day: u64,
    pending: BTreeMap<Pseudonym, VecDeque<NotificationMsg>>,
    cover: CoverClock,
    diagnosis_bytes_in: u64,
}

impl Grace {
    pub fn new<R: RngCore + CryptoRng>(
        params: Params,
        cover_rate_secs: f64,
        rng: &mut R,
    ) -> Result<Self, MessageError> {
        Ok(Grace {
            keys: PkeKeyPair::generate(rng),
            params,
            registry: BTreeMap::new(),
            uid_lookup: HashMap::new(),
            lookup_days: BTreeMap::new(),
            current_day: 0,
            pending: BTreeMap::new(),
            cover: CoverClock::new(cover_rate_secs)?,
            diagnosis_bytes_in: 0,
        })
    }

    pub fn public_key(&self) -> PkePublicKey {
        self.keys.public_key()
    }

    pub fn cover_clock(&self) -> CoverClock {
        self.cover
    }

    /// Stores the seeds with counter 0 and precomputes the pseudonym's uids
    /// for every period of the live window.
    pub fn grace_register(&mut self, pseudonym: Pseudonym, blob: &SetupBlob) -> Result<(), MessageError> {
        if self.registry.contains_key(&pseudonym) {
            return Err(MessageError::DuplicatePseudonym(pseudonym));
        }
        let plain = self
            .keys
            .decrypt(blob.as_bytes())
            .map_err(|_| MessageError::MalformedSetup)?;
        if plain.len() != 2 * Seed::LEN {
            return Err(MessageError::MalformedSetup);
        }
        let reg = GraceRegistration {
            seed_s: Seed::from_bytes(plain[..16].try_into().expect("16")),
            seed_t: Seed::from_bytes(plain[16..].try_into().expect("16")),
            counter: 0,
        };
        for day in self.params.window_start_day(self.current_day)..=self.current_day {
            self.add_lookup_day(pseudonym, &reg.seed_s, day);
        }
        self.registry.insert(pseudonym, reg);
        Ok(())
    }

    /// Extends the lookup table through `day` and drops days that left the
    /// window.
    pub fn advance_to_day(&mut self, day: u64) {
        if day <= self.current_day {
            return;
        }
        let first_new = (self.current_day + 1).max(self.params.window_start_day(day));
        self.current_day = day;
        let seeds: Vec<(Pseudonym, Seed)> =
            self.registry.iter().map(|(p, r)| (*p, r.seed_s)).collect();
        for d in first_new..=day {
            for (p, seed) in &seeds {
                self.add_lookup_day(*p, seed, d);
            }
        }
        let keep_from = self.params.window_start_day(day);
        let expired: Vec<u64> = self.lookup_days.range(..keep_from).map(|(d, _)| *d).collect();
        for d in expired {
            for uid in self.lookup_days.remove(&d).unwrap_or_default() {
                self.uid_lookup.remove(&uid);
            }
        }
    }

    fn add_lookup_day(&mut self, pseudonym: Pseudonym, seed_s: &Seed, day: u64) {
        let per_day = self.params.periods_per_day();
        let bucket = self.lookup_days.entry(day).or_default();
        for k in 0..per_day {
            let period = TimePeriod(day * per_day + k);
            let uid = Uid::derive(seed_s, period);
            self.uid_lookup.insert(uid, (pseudonym, period));
            bucket.push(uid);
        }
    }

    pub fn lookup(&self, uid: &Uid) -> Option<(Pseudonym, TimePeriod)> {
        self.uid_lookup.get(uid).copied()
    }

    pub fn lookup_len(&self) -> usize {
        self.uid_lookup.len()
    }

    pub fn registration(&self, pseudonym: &Pseudonym) -> Option<&GraceRegistration> {
        self.registry.get(pseudonym)
    }

    pub fn diagnosis_bytes_in(&self) -> u64 {
        self.diagnosis_bytes_in
    }

    /// Resolves a certified upload and emits one REAL notification per
    /// distinct pseudonym, in pseudonym order.
    pub fn grace_inform(
        &mut self,
        diagnosis: &CertifiedDiagnosis,
        now: Timestamp,
    ) -> Result<Vec<NotificationMsg>, MessageError> {
        let exposures = self.resolve(diagnosis, now)?;
        Ok(exposures
            .into_iter()
            .map(|(p, payload)| self.next_message(p, payload))
            .collect())
    }

    /// As [`Grace::grace_inform`], but the messages are queued for the
    /// sending ticks instead of emitted. Returns copies of what was queued.
    pub fn grace_record_p2(
        &mut self,
        diagnosis: &CertifiedDiagnosis,
        now: Timestamp,
    ) -> Result<Vec<NotificationMsg>, MessageError> {
        let exposures = self.resolve(diagnosis, now)?;
        let mut queued = Vec::with_capacity(exposures.len());
        for (p, payload) in exposures {
            let msg = self.next_message(p, payload);
            self.pending.entry(p).or_default().push_back(msg);
            queued.push(msg);
        }
        Ok(queued)
    }

    pub fn pending_for(&self, pseudonym: &Pseudonym) -> Vec<NotificationMsg> {
        self.pending
            .get(pseudonym)
            .map(|q| q.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn pending_total(&self) -> usize {
        self.pending.values().map(VecDeque::len).sum()
    }

    /// One message for `pseudonym`: the oldest queued REAL one, else cover.
    pub fn grace_send_tick_p2(&mut self, pseudonym: Pseudonym) -> Result<NotificationMsg, MessageError> {
        if !self.registry.contains_key(&pseudonym) {
            return Err(MessageError::UnknownPseudonym(pseudonym));
        }
        if let Some(msg) = self.pending.get_mut(&pseudonym).and_then(VecDeque::pop_front) {
            return Ok(msg);
        }
        Ok(self.next_message(pseudonym, Payload::DUMMY))
    }

    pub fn dummy_message(&mut self, pseudonym: Pseudonym) -> Result<NotificationMsg, MessageError> {
        if !self.registry.contains_key(&pseudonym) {
            return Err(MessageError::UnknownPseudonym(pseudonym));
        }
        Ok(self.next_message(pseudonym, Payload::DUMMY))
    }

    /// Cover traffic for `[start, start + horizon_secs)`: an independent
    /// Poisson process per pseudonym, merged and counter-stamped in send order.
    pub fn grace_cover_schedule<R: Rng + ?Sized>(
        &mut self,
        start: Timestamp,
        horizon_secs: u64,
        rng: &mut R,
    ) -> Vec<(f64, NotificationMsg)> {
        let end = start.secs() as f64 + horizon_secs as f64;
        let mut times: Vec<(f64, Pseudonym)> = Vec::new();
        let pseudonyms: Vec<Pseudonym> = self.registry.keys().copied().collect();
        for p in pseudonyms {
            let mut t = start.secs() as f64 + self.cover.next_gap(rng);
            while t < end {
                times.push((t, p));
                t += self.cover.next_gap(rng);
            }
        }
        times.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        times
            .into_iter()
            .map(|(t, p)| (t, self.next_message(p, Payload::DUMMY)))
            .collect()
    }

    fn resolve(
        &mut self,
        diagnosis: &CertifiedDiagnosis,
        now: Timestamp,
    ) -> Result<BTreeMap<Pseudonym, Payload>, MessageError> {
        self.diagnosis_bytes_in += diagnosis.wire_len() as u64;
        let plain = self
            .keys
            .decrypt(diagnosis.blob())
            .map_err(|_| MessageError::MalformedSubmission)?;
        let entries = decode_seen_set(&plain)?;
        let mut hits: BTreeMap<Pseudonym, (u32, u64)> = BTreeMap::new();
        for entry in entries {
            if entry.time > now || !self.params.in_window(entry.time, now) {
                continue;
            }
            if let Some((p, _)) = self.lookup(&entry.uid) {
                let slot = hits.entry(p).or_insert((0, 0));
                slot.0 += 1;
                slot.1 = slot.1.max(entry.time.day());
            }
        }
        Ok(hits
            .into_iter()
            .map(|(p, (count, last_day))| {
                let payload = Payload {
                    kind: PayloadKind::Real,
                    contact_count: count.min(u32::from(u16::MAX)) as u16,
                    last_contact_days_ago: (now.day() - last_day).min(u64::from(u16::MAX)) as u16,
                };
                (p, payload)
            })
            .collect())
    }

    fn next_message(&mut self, pseudonym: Pseudonym, payload: Payload) -> NotificationMsg {
        let reg = self.registry.get_mut(&pseudonym).expect("registered pseudonym");
        reg.counter += 1;
        NotificationMsg {
            pseudonym,
            counter: reg.counter,
            masked_payload: mask_payload(&reg.seed_t, reg.counter, &payload.encode()),
        }
    }
}

impl std::fmt::Debug for Grace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grace")
            .field("registered", &self.registry.len())
            .field("lookup", &self.uid_lookup.len())
            .field("current_day", &self.current_day)
            .finish_non_exhaustive()
    }
}
