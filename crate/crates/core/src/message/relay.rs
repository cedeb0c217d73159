use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;

use super::{Identity, MessageError, NotificationMsg, Pseudonym, SetupBlob};
use crate::model::Timestamp;

/// Undeliverable notifications are held this long, then dropped.
pub const RELAY_BUFFER_SECS: u64 = 86_400;

/// What the relay can observe about a forwarded message.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct RelayLogEntry {
    pub pseudonym: Pseudonym,
    pub time: Timestamp,
    pub bytes: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Delivery {
    pub identity: Identity,
    pub counter: u64,
    pub masked_payload: [u8; 8],
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ForwardOutcome {
    Delivered(Delivery),
    Buffered,
}

/// Identity/pseudonym table plus the traffic log. Holds no seeds, uids or
/// unmasked payloads.
#[derive(Debug, Default)]
pub struct Relay {
    by_identity: HashMap<Identity, Pseudonym>,
    by_pseudonym: HashMap<Pseudonym, Identity>,
    offline: HashSet<Identity>,
    buffered: HashMap<Identity, VecDeque<(Timestamp, Delivery)>>,
    log: Vec<RelayLogEntry>,
    dropped: u64,
}

impl Relay {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assigns a fresh random pseudonym and passes the blob through untouched.
    pub fn relay_register<R: Rng + ?Sized>(
        &mut self,
        identity: Identity,
        blob: SetupBlob,
        rng: &mut R,
    ) -> Result<(Pseudonym, SetupBlob), MessageError> {
        if self.by_identity.contains_key(&identity) {
            return Err(MessageError::DuplicateIdentity(identity));
        }
        if self.by_pseudonym.len() as u32 >= Pseudonym::SPACE {
            return Err(MessageError::PseudonymSpaceExhausted);
        }
        let pseudonym = loop {
            let p = Pseudonym::new(rng.gen_range(0..Pseudonym::SPACE)).expect("in range");
            if !self.by_pseudonym.contains_key(&p) {
                break p;
            }
        };
        self.by_identity.insert(identity, pseudonym);
        self.by_pseudonym.insert(pseudonym, identity);
        Ok((pseudonym, blob))
    }

    pub fn relay_forward(
        &mut self,
        msg: &NotificationMsg,
        now: Timestamp,
    ) -> Result<ForwardOutcome, MessageError> {
        let identity = *self
            .by_pseudonym
            .get(&msg.pseudonym)
            .ok_or(MessageError::UnknownPseudonym(msg.pseudonym))?;
        self.log.push(RelayLogEntry {
            pseudonym: msg.pseudonym,
            time: now,
            bytes: NotificationMsg::WIRE_LEN,
        });
        let delivery = Delivery {
            identity,
            counter: msg.counter,
            masked_payload: msg.masked_payload,
        };
        if self.offline.contains(&identity) {
            self.buffered.entry(identity).or_default().push_back((now, delivery));
            return Ok(ForwardOutcome::Buffered);
        }
        Ok(ForwardOutcome::Delivered(delivery))
    }

    pub fn set_offline(&mut self, identity: Identity) {
        self.offline.insert(identity);
    }

    /// Marks the identity reachable and flushes whatever is still inside the
    /// buffering horizon, oldest first.
    pub fn set_online(&mut self, identity: Identity, now: Timestamp) -> Vec<Delivery> {
        self.offline.remove(&identity);
        let Some(queue) = self.buffered.remove(&identity) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(queue.len());
        for (at, delivery) in queue {
            if now.secs().saturating_sub(at.secs()) <= RELAY_BUFFER_SECS {
                out.push(delivery);
            } else {
                self.dropped += 1;
            }
        }
        out
    }

    pub fn pseudonym_of(&self, identity: &Identity) -> Option<Pseudonym> {
        self.by_identity.get(identity).copied()
    }

    pub fn registered(&self) -> usize {
        self.by_pseudonym.len()
    }

    pub fn log(&self) -> &[RelayLogEntry] {
        &self.log
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
