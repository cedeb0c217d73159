use std::collections::{BTreeMap, HashMap};

use rand::{CryptoRng, RngCore};

use super::{InfectionQuery, InfectionResponse, SessionId, SetError, StatusUpdate};
use crate::model::{Params, Share, Uid};

/// Why a query entry produced no response line.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EntryDiagnostic {
    pub index: u32,
    pub reason: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct RespondOutcome {
    pub response: InfectionResponse,
    pub diagnostics: Vec<EntryDiagnostic>,
    /// Entries whose peer uid had no live status.
    pub skipped_unknown: usize,
}

/// One edge instance of the exported pseudonymous graph; `a < b`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct GraphEdge {
    pub a: Uid,
    pub b: Uid,
    pub day: u64,
}

impl GraphEdge {
    pub fn new(x: Uid, y: Uid, day: u64) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        GraphEdge { a, b, day }
    }
}

#[derive(Clone, Copy, Debug)]
struct EdgeStats {
    multiplicity: u32,
    first_day: u64,
}

/// Everything the government holds: indicators keyed by uid, the
/// interaction graph it can infer, and byte counters. No infection flags,
/// no secret keys, no equality outcomes.
#[derive(Debug)]
pub struct GovState {
    params: Params,
    today: u64,
    status_db: HashMap<Uid, (Share, u64)>,
    sessions: HashMap<SessionId, (u64, Vec<Uid>)>,
    edges: BTreeMap<(Uid, Uid), EdgeStats>,
    status_bytes_in: u64,
    query_bytes_in: u64,
    response_bytes_out: u64,
}

impl GovState {
    pub fn new(params: Params) -> Self {
        GovState {
            params,
            today: 0,
            status_db: HashMap::new(),
            sessions: HashMap::new(),
            edges: BTreeMap::new(),
            status_bytes_in: 0,
            query_bytes_in: 0,
            response_bytes_out: 0,
        }
    }

    /// Moves the clock, drops indicators that left the window and forgets
    /// the previous day's sessions.
    pub fn advance_to_day(&mut self, day: u64) {
        if day <= self.today {
            return;
        }
        self.today = day;
        let params = &self.params;
        let today = self.today;
        self.status_db
            .retain(|_, (_, reported)| today.saturating_sub(*reported) < u64::from(params.window_n));
        self.sessions.clear();
    }

    pub fn today(&self) -> u64 {
        self.today
    }

    pub fn government_ingest(&mut self, session: SessionId, update: &StatusUpdate) -> Result<(), SetError> {
        if self.today.saturating_sub(update.day) >= u64::from(self.params.window_n) {
            return Err(SetError::Stale { day: update.day, today: self.today });
        }
        self.status_bytes_in += update.wire_len() as u64;
        for (uid, indicator) in &update.entries {
            match self.status_db.get(uid) {
                Some((_, day)) if *day > update.day => {}
                _ => {
                    self.status_db.insert(*uid, (*indicator, update.day));
                }
            }
        }
        let own: Vec<Uid> = update.entries.iter().map(|(u, _)| *u).collect();
        self.sessions.insert(session, (update.day, own));
        Ok(())
    }

    fn live_indicator(&self, uid: &Uid) -> Option<Share> {
        self.status_db
            .get(uid)
            .filter(|(_, day)| self.today.saturating_sub(*day) < u64::from(self.params.window_n))
            .map(|(s, _)| *s)
    }

    /// Blinded difference against a fresh encryption of the stored indicator
    /// for every entry with a live status, in query order. Also pairs the
    /// query with the same session's update to extend the interaction graph.
    pub fn government_respond<R: RngCore + CryptoRng>(
        &mut self,
        session: SessionId,
        query: &InfectionQuery,
        rng: &mut R,
    ) -> RespondOutcome {
        self.query_bytes_in += query.wire_len() as u64;
        let pk = &query.pk;
        let mut out = RespondOutcome::default();
        for (i, entry) in query.entries.iter().enumerate() {
            let index = i as u32;
            let enc_share = match &entry.enc_share {
                Ok(c) => c,
                Err(e) => {
                    out.diagnostics.push(EntryDiagnostic { index, reason: e.to_string() });
                    continue;
                }
            };
            let Some(indicator) = self.live_indicator(&entry.peer_uid) else {
                out.skipped_unknown += 1;
                continue;
            };
            let result = pk
                .encrypt_u64(u64::from(indicator.value()), rng)
                .and_then(|enc_ind| pk.blinded_difference(enc_share, &enc_ind, rng));
            match result {
                Ok(c) => out.response.entries.push((index, c)),
                Err(e) => out.diagnostics.push(EntryDiagnostic { index, reason: e.to_string() }),
            }
        }
        self.response_bytes_out += out.response.wire_len(pk) as u64;
        self.record_edges(session, query);
        out
    }

    fn record_edges(&mut self, session: SessionId, query: &InfectionQuery) {
        let Some((day, own)) = self.sessions.remove(&session) else {
            return;
        };
        if own.len() != query.entries.len() {
            return;
        }
        let mut counts: BTreeMap<(Uid, Uid), u32> = BTreeMap::new();
        for (own_uid, entry) in own.iter().zip(&query.entries) {
            let e = GraphEdge::new(*own_uid, entry.peer_uid, day);
            *counts.entry((e.a, e.b)).or_insert(0) += 1;
        }
        for (key, multiplicity) in counts {
            let stats = self.edges.entry(key).or_insert(EdgeStats { multiplicity: 0, first_day: day });
            stats.multiplicity = stats.multiplicity.max(multiplicity);
            stats.first_day = stats.first_day.min(day);
        }
    }

    /// Edge instances (multiplicity expanded), sorted.
    pub fn government_graph_export(&self) -> Vec<GraphEdge> {
        let mut out = Vec::new();
        for ((a, b), stats) in &self.edges {
            for _ in 0..stats.multiplicity {
                out.push(GraphEdge { a: *a, b: *b, day: stats.first_day });
            }
        }
        out.sort();
        out
    }

    pub fn status_len(&self) -> usize {
        self.status_db.len()
    }

    pub fn status_bytes_in(&self) -> u64 {
        self.status_bytes_in
    }

    pub fn query_bytes_in(&self) -> u64 {
        self.query_bytes_in
    }

    pub fn response_bytes_out(&self) -> u64 {
        self.response_bytes_out
    }
}

/// `uid_hex uid_hex day` per line.
pub fn graph_to_text(edges: &[GraphEdge]) -> String {
    let mut s = String::with_capacity(edges.len() * 70);
    for e in edges {
        s.push_str(&format!("{} {} {}\n", e.a.to_hex(), e.b.to_hex(), e.day));
    }
    s
}
