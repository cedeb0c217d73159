use std::collections::HashMap;

use rand::{CryptoRng, RngCore};

use super::{InfectionQuery, InfectionResponse, QueryEntry, SetError, StatusUpdate};
use crate::crypto::{ahe_keygen, AhePublicKey, AheSecretKey};
use crate::model::{evict_expired, ContactRecord, Params, Share, TimePeriod, Timestamp, Uid};

/// Zero decryptions from one response, mapped back to contact positions.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RiskReport {
    pub zero_count: usize,
    pub zero_indices: Vec<usize>,
}

pub struct UserSetState {
    pk: AhePublicKey,
    sk: AheSecretKey,
    contacts: Vec<ContactRecord>,
    current: Option<(TimePeriod, Uid, Share)>,
    rotation_frozen: bool,
    infected: bool,
}

impl UserSetState {
    pub fn new<R: RngCore + CryptoRng>(modulus_bits: usize, rng: &mut R) -> Result<Self, SetError> {
        let (pk, sk) = ahe_keygen(modulus_bits, rng)?;
        Ok(UserSetState {
            pk,
            sk,
            contacts: Vec::new(),
            current: None,
            rotation_frozen: false,
            infected: false,
        })
    }

    pub fn public_key(&self) -> &AhePublicKey {
        &self.pk
    }

    /// The `(uid, share)` broadcast during `period`; a fresh pair is drawn
    /// the first time a new period is seen.
    pub fn identity_for<R: RngCore + CryptoRng>(&mut self, period: TimePeriod, rng: &mut R) -> (Uid, Share) {
        match self.current {
            Some((p, uid, share)) if p == period || self.rotation_frozen => (uid, share),
            _ => {
                let pair = (Uid::random(rng), crate::model::Share::random(rng));
                self.current = Some((period, pair.0, pair.1));
                pair
            }
        }
    }

    /// Keeps the current pair forever. Only for the linkage positive control.
    pub fn freeze_rotation(&mut self) {
        self.rotation_frozen = true;
    }

    pub fn set_infected(&mut self) {
        self.infected = true;
    }

    pub fn is_infected(&self) -> bool {
        self.infected
    }

    pub fn contacts(&self) -> &[ContactRecord] {
        &self.contacts
    }

    pub fn evict(&mut self, now: Timestamp, params: &Params) {
        evict_expired(&mut self.contacts, now, params);
    }

    /// One entry per live contact record, in contacts order. Each distinct
    /// own uid gets a single indicator: the share sent if infected,
    /// otherwise uniform over the other fifteen values.
    pub fn build_status_update<R: RngCore + CryptoRng>(
        &mut self,
        now: Timestamp,
        params: &Params,
        rng: &mut R,
    ) -> StatusUpdate {
        self.evict(now, params);
        let mut chosen: HashMap<Uid, Share> = HashMap::new();
        let entries = self
            .contacts
            .iter()
            .map(|c| {
                let indicator = *chosen.entry(c.own_uid).or_insert_with(|| {
                    if self.infected {
                        c.own_share
                    } else {
                        c.own_share.random_other(rng)
                    }
                });
                (c.own_uid, indicator)
            })
            .collect();
        StatusUpdate { day: now.day(), entries }
    }

    /// `(peer_uid, enc(peer_share))` for each contact, in contacts order.
    pub fn build_infection_query<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Result<InfectionQuery, SetError> {
        let entries = self
            .contacts
            .iter()
            .map(|c| {
                Ok(QueryEntry {
                    peer_uid: c.peer_uid,
                    enc_share: Ok(self.pk.encrypt_u64(u64::from(c.peer_share.value()), rng)?),
                })
            })
            .collect::<Result<_, SetError>>()?;
        Ok(InfectionQuery { pk: self.pk.clone(), entries })
    }

    /// Decrypts every returned entry. Indices refer to the contacts list as
    /// it was when the query was built.
    pub fn user_learn(&self, response: &InfectionResponse) -> Result<RiskReport, SetError> {
        let own = self.pk.key_id();
        if let Some((_, c)) = response.entries.iter().find(|(_, c)| c.key_id() != own) {
            return Err(SetError::KeyBinding { expected: own, found: c.key_id() });
        }
        let mut report = RiskReport::default();
        for (index, c) in &response.entries {
            let i = *index as usize;
            if i >= self.contacts.len() {
                return Err(SetError::IndexOutOfRange { index: *index, len: self.contacts.len() });
            }
            if self.sk.decrypt_is_zero(c)? {
                report.zero_count += 1;
                report.zero_indices.push(i);
            }
        }
        Ok(report)
    }

    pub(crate) fn push_contact(&mut self, record: ContactRecord, params: &Params) {
        self.contacts.push(record);
        evict_expired(&mut self.contacts, record.time, params);
    }
}

impl std::fmt::Debug for UserSetState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UserSetState")
            .field("key_id", &self.pk.key_id())
            .field("contacts", &self.contacts.len())
            .finish_non_exhaustive()
    }
}

/// Stage 1 between `a` and `b` at `now`: each side stores the other's pair
/// next to its own.
pub fn encounter_exchange<R: RngCore + CryptoRng>(
    a: &mut UserSetState,
    b: &mut UserSetState,
    now: Timestamp,
    params: &Params,
    rng: &mut R,
) {
    let period = now.period(params);
    let (uid_a, share_a) = a.identity_for(period, rng);
    let (uid_b, share_b) = b.identity_for(period, rng);
    a.push_contact(
        ContactRecord { peer_uid: uid_b, peer_share: share_b, own_uid: uid_a, own_share: share_a, time: now },
        params,
    );
    b.push_contact(
        ContactRecord { peer_uid: uid_a, peer_share: share_a, own_uid: uid_b, own_share: share_b, time: now },
        params,
    );
}
