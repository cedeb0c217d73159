//! The discrete-event driver. One [`Simulation`] owns every party for one
//! protocol and advances a whole day per step.

use std::collections::{BTreeMap, HashMap};

use rand_chacha::ChaCha20Rng;

use super::population::{diagnosis_schedule, generate_encounters, stream_rng, Diagnosis, EncounterEvent, PROTOCOL_STREAM};
use super::probes::{detection_audit, relay_distinguisher_probe, snooper_probe, BroadcastObservation};
use super::report::{GraphCheck, SimulationReport};
use super::scenario::{Protocol, Scenario, ScenarioError};
use crate::message::{
    CoverClock, ForwardOutcome, Grace, HealthProvider, Identity, MessageError, NotificationMsg, Pseudonym,
    Received, Relay, UserMsgState,
};
use crate::model::{TimePeriod, Timestamp, Uid, SECONDS_PER_DAY};
use crate::set::{encounter_exchange, GovState, GraphEdge, SessionId, SetError, UserSetState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("message protocol: {0}")]
    Message(#[from] MessageError),
    #[error("set protocol: {0}")]
    Set(#[from] SetError),
}

const KIND_DIAGNOSIS: u8 = 0;
const KIND_ENCOUNTER: u8 = 1;
const KIND_COVER: u8 = 2;
const KIND_TICK: u8 = 3;

struct MessageWorld {
    grace: Grace,
    relay: Relay,
    henry: HealthProvider,
    users: Vec<UserMsgState>,
    pseudonyms: Vec<Pseudonym>,
    owner: HashMap<Identity, usize>,
    cover: CoverClock,
    /// Per user, the absolute time of the next cover message (first protocol).
    next_cover: Vec<f64>,
    /// `(pseudonym, counter)` of each REAL message → (source, Grace's send-decision time).
    tags: HashMap<(Pseudonym, u64), (usize, Timestamp)>,
    setup_user_to_relay: u64,
    setup_relay_to_grace: u64,
    user_to_henry: u64,
    henry_to_grace: u64,
    grace_to_relay: u64,
    relay_to_user: u64,
}

struct SetWorld {
    gov: GovState,
    users: Vec<UserSetState>,
    uid_owner: HashMap<Uid, usize>,
    truth_edges: Vec<GraphEdge>,
}

enum World {
    Message(Box<MessageWorld>),
    Set(Box<SetWorld>),
}

/// Steppable run of one scenario. Every observable outcome is a pure
/// function of the scenario.
pub struct Simulation {
    scenario: Scenario,
    rng: ChaCha20Rng,
    day: u64,
    diagnoses: Vec<Diagnosis>,
    next_diagnosis: usize,
    diagnosis_time: Vec<Option<Timestamp>>,
    /// Per user, `(time, other)` for every encounter still inside the window.
    history: Vec<Vec<(Timestamp, usize)>>,
    truth: BTreeMap<(usize, usize), u64>,
    notified: BTreeMap<(usize, usize), u64>,
    broadcasts: Vec<BroadcastObservation>,
    encounters: u64,
    real_delivered: u64,
    receive_errors: u64,
    max_latency: Option<u64>,
    zero_decryptions: u64,
    false_zero: u64,
    response_diagnostics: u64,
    world: World,
}

impl Simulation {
    /// Runs setup for every user; no day has elapsed yet.
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let mut rng = stream_rng(scenario.seed, PROTOCOL_STREAM);
        let n = scenario.population;
        let world = if scenario.protocol.is_message() {
            World::Message(Box::new(MessageWorld::setup(&scenario, &mut rng)?))
        } else {
            let mut users = Vec::with_capacity(n);
            for _ in 0..n {
                let mut u = UserSetState::new(scenario.ahe_key_bits, &mut rng)?;
                if scenario.rotation_disabled {
                    u.freeze_rotation();
                }
                users.push(u);
            }
            World::Set(Box::new(SetWorld {
                gov: GovState::new(scenario.params),
                users,
                uid_owner: HashMap::new(),
                truth_edges: Vec::new(),
            }))
        };
        let diagnoses = diagnosis_schedule(&scenario);
        let mut diagnosis_time = vec![None; n];
        for d in &diagnoses {
            diagnosis_time[d.user] = Some(d.time);
        }
        Ok(Simulation {
            rng,
            day: 0,
            diagnoses,
            next_diagnosis: 0,
            diagnosis_time,
            history: vec![Vec::new(); n],
            truth: BTreeMap::new(),
            notified: BTreeMap::new(),
            broadcasts: Vec::new(),
            encounters: 0,
            real_delivered: 0,
            receive_errors: 0,
            max_latency: None,
            zero_decryptions: 0,
            false_zero: 0,
            response_diagnostics: 0,
            world,
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Days fully simulated so far.
    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn is_done(&self) -> bool {
        self.day >= self.scenario.days
    }

    /// Simulates the next day. Returns whether days remain.
    pub fn step_day(&mut self) -> Result<bool, SimError> {
        if self.is_done() {
            return Ok(false);
        }
        let day = self.day;
        let encounters: Vec<EncounterEvent> = generate_encounters(&self.scenario, day)?
            .into_iter()
            .filter(|e| !self.isolated(e.user_a, e.time) && !self.isolated(e.user_b, e.time))
            .collect();
        let first = self.next_diagnosis;
        while self.next_diagnosis < self.diagnoses.len() && self.diagnoses[self.next_diagnosis].time.day() == day {
            self.next_diagnosis += 1;
        }
        let todays: Vec<Diagnosis> = self.diagnoses[first..self.next_diagnosis].to_vec();
        match &self.world {
            World::Message(_) => self.message_day(day, &encounters, &todays)?,
            World::Set(_) => self.set_day(day, &encounters, &todays)?,
        }
        self.day += 1;
        Ok(!self.is_done())
    }

    fn isolated(&self, user: usize, at: Timestamp) -> bool {
        self.scenario.isolation && self.diagnosis_time[user].is_some_and(|t| t <= at)
    }

    fn period_for(&self, at: Timestamp) -> TimePeriod {
        if self.scenario.rotation_disabled {
            TimePeriod(0)
        } else {
            at.period(&self.scenario.params)
        }
    }

    fn note_encounter(&mut self, e: &EncounterEvent) {
        self.encounters += 1;
        self.history[e.user_a].push((e.time, e.user_b));
        self.history[e.user_b].push((e.time, e.user_a));
    }

    /// Ground truth: every pre-diagnosis encounter of the source still
    /// inside the window.
    fn record_truth(&mut self, d: &Diagnosis) {
        let params = self.scenario.params;
        let hist = &mut self.history[d.user];
        hist.retain(|(t, _)| params.in_window(*t, d.time));
        for (t, other) in hist.iter() {
            if *t < d.time {
                let entry = self.truth.entry((*other, d.user)).or_insert(t.day());
                *entry = (*entry).max(t.day());
            }
        }
    }

    fn message_day(&mut self, day: u64, encounters: &[EncounterEvent], todays: &[Diagnosis]) -> Result<(), SimError> {
        let World::Message(world) = &mut self.world else { unreachable!() };
        world.grace.advance_to_day(day);
        let params = self.scenario.params;
        let day_start = day * SECONDS_PER_DAY;
        let day_end = day_start + SECONDS_PER_DAY;
        let mut events: Vec<(f64, u8, usize)> = Vec::new();
        events.extend(todays.iter().enumerate().map(|(i, d)| (d.time.secs() as f64, KIND_DIAGNOSIS, i)));
        events.extend(encounters.iter().enumerate().map(|(i, e)| (e.time.secs() as f64, KIND_ENCOUNTER, i)));
        match self.scenario.protocol {
            Protocol::MsgP1 => {
                for (u, next) in world.next_cover.iter_mut().enumerate() {
                    while *next < day_end as f64 {
                        events.push((*next, KIND_COVER, u));
                        *next += world.cover.next_gap(&mut self.rng);
                    }
                }
            }
            Protocol::MsgP2 => {
                let per_day = params.periods_per_day();
                events.extend((1..=per_day).map(|k| ((day_start + k * params.period_secs()) as f64, KIND_TICK, 0)));
            }
            Protocol::Set => unreachable!(),
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        for (time, kind, idx) in events {
            match kind {
                KIND_DIAGNOSIS => {
                    let d = todays[idx];
                    self.record_truth(&d);
                    let World::Message(world) = &mut self.world else { unreachable!() };
                    let messages = world.diagnose(d, &params, self.scenario.protocol, &mut self.rng)?;
                    if self.scenario.protocol == Protocol::MsgP1 {
                        for msg in messages {
                            self.deliver(&msg, d.time, day)?;
                        }
                    }
                }
                KIND_ENCOUNTER => {
                    let e = encounters[idx];
                    self.note_encounter(&e);
                    let period = self.period_for(e.time);
                    let World::Message(world) = &mut self.world else { unreachable!() };
                    let uid_a = world.users[e.user_a].derive_current_uid(period);
                    let uid_b = world.users[e.user_b].derive_current_uid(period);
                    world.users[e.user_a].record_beacon(uid_b, e.time, &params);
                    world.users[e.user_b].record_beacon(uid_a, e.time, &params);
                    let observed = e.time.period(&params);
                    self.broadcasts.push(BroadcastObservation { uid: uid_a, period: observed, user: e.user_a });
                    self.broadcasts.push(BroadcastObservation { uid: uid_b, period: observed, user: e.user_b });
                }
                KIND_COVER => {
                    let World::Message(world) = &mut self.world else { unreachable!() };
                    let msg = world.grace.dummy_message(world.pseudonyms[idx])?;
                    self.deliver(&msg, Timestamp(time as u64), day)?;
                }
                KIND_TICK => {
                    let now = Timestamp(time as u64);
                    for u in 0..self.scenario.population {
                        let World::Message(world) = &mut self.world else { unreachable!() };
                        let msg = world.grace.grace_send_tick_p2(world.pseudonyms[u])?;
                        self.deliver(&msg, now, day)?;
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn deliver(&mut self, msg: &NotificationMsg, now: Timestamp, day: u64) -> Result<(), SimError> {
        let World::Message(world) = &mut self.world else { unreachable!() };
        world.grace_to_relay += NotificationMsg::WIRE_LEN as u64;
        let ForwardOutcome::Delivered(delivery) = world.relay.relay_forward(msg, now)? else {
            return Ok(());
        };
        world.relay_to_user += (8 + delivery.masked_payload.len()) as u64;
        let user = world.owner[&delivery.identity];
        match world.users[user].user_receive(delivery.counter, &delivery.masked_payload) {
            Ok(Received::Real(_)) => {
                self.real_delivered += 1;
                if let Some((source, recorded)) = world.tags.remove(&(msg.pseudonym, msg.counter)) {
                    self.notified.entry((user, source)).or_insert(day);
                    let latency = now.secs().saturating_sub(recorded.secs());
                    self.max_latency = Some(self.max_latency.map_or(latency, |m| m.max(latency)));
                }
            }
            Ok(Received::Dummy) => {}
            Err(_) => self.receive_errors += 1,
        }
        Ok(())
    }

    fn set_day(&mut self, day: u64, encounters: &[EncounterEvent], todays: &[Diagnosis]) -> Result<(), SimError> {
        let params = self.scenario.params;
        {
            let World::Set(world) = &mut self.world else { unreachable!() };
            world.gov.advance_to_day(day);
        }
        let mut events: Vec<(Timestamp, u8, usize)> = Vec::new();
        events.extend(todays.iter().enumerate().map(|(i, d)| (d.time, KIND_DIAGNOSIS, i)));
        events.extend(encounters.iter().enumerate().map(|(i, e)| (e.time, KIND_ENCOUNTER, i)));
        events.sort();
        for (_, kind, idx) in events {
            if kind == KIND_DIAGNOSIS {
                let d = todays[idx];
                self.record_truth(&d);
                let World::Set(world) = &mut self.world else { unreachable!() };
                world.users[d.user].set_infected();
                continue;
            }
            let e = encounters[idx];
            self.note_encounter(&e);
            let World::Set(world) = &mut self.world else { unreachable!() };
            let (lo, hi) = (e.user_a.min(e.user_b), e.user_a.max(e.user_b));
            let (left, right) = world.users.split_at_mut(hi);
            let (a, b) = (&mut left[lo], &mut right[0]);
            encounter_exchange(a, b, e.time, &params, &mut self.rng);
            let (uid_lo, uid_hi) = (a.contacts().last().expect("just pushed").own_uid, b.contacts().last().expect("just pushed").own_uid);
            world.uid_owner.insert(uid_lo, lo);
            world.uid_owner.insert(uid_hi, hi);
            world.truth_edges.push(GraphEdge::new(uid_lo, uid_hi, day));
            let observed = e.time.period(&params);
            self.broadcasts.push(BroadcastObservation { uid: uid_lo, period: observed, user: lo });
            self.broadcasts.push(BroadcastObservation { uid: uid_hi, period: observed, user: hi });
        }

        let now = Timestamp((day + 1) * SECONDS_PER_DAY - 1);
        let population = self.scenario.population as u64;
        let World::Set(world) = &mut self.world else { unreachable!() };
        for (i, user) in world.users.iter_mut().enumerate() {
            let update = user.build_status_update(now, &params, &mut self.rng);
            world.gov.government_ingest(SessionId(day * population + i as u64), &update)?;
        }
        for i in 0..world.users.len() {
            let query = world.users[i].build_infection_query(&mut self.rng)?;
            let outcome = world.gov.government_respond(SessionId(day * population + i as u64), &query, &mut self.rng);
            self.response_diagnostics += outcome.diagnostics.len() as u64;
            let report = world.users[i].user_learn(&outcome.response)?;
            self.zero_decryptions += report.zero_count as u64;
            for index in report.zero_indices {
                let peer_uid = world.users[i].contacts()[index].peer_uid;
                let peer = world.uid_owner[&peer_uid];
                if self.diagnosis_time[peer].is_some_and(|t| t <= now) {
                    self.notified.entry((i, peer)).or_insert(day);
                } else {
                    self.false_zero += 1;
                }
            }
        }
        Ok(())
    }

    /// Runs the probes and assembles the report.
    pub fn finish(self) -> SimulationReport {
        let params = self.scenario.params;
        let mut channel_bytes: BTreeMap<&'static str, u64> = BTreeMap::new();
        let mut relay = None;
        let mut graph = None;
        let mut graph_export = Vec::new();
        match &self.world {
            World::Message(w) => {
                channel_bytes.insert("setup.user_to_relay", w.setup_user_to_relay);
                channel_bytes.insert("setup.relay_to_grace", w.setup_relay_to_grace);
                channel_bytes.insert("diagnosis.user_to_henry", w.user_to_henry);
                channel_bytes.insert("diagnosis.henry_to_grace", w.henry_to_grace);
                channel_bytes.insert("notify.grace_to_relay", w.grace_to_relay);
                channel_bytes.insert("notify.relay_to_user", w.relay_to_user);
                relay = Some(relay_distinguisher_probe(w.relay.log(), self.scenario.protocol, &params, self.day));
            }
            World::Set(w) => {
                channel_bytes.insert("status.user_to_gov", w.gov.status_bytes_in());
                channel_bytes.insert("query.user_to_gov", w.gov.query_bytes_in());
                channel_bytes.insert("response.gov_to_user", w.gov.response_bytes_out());
                graph_export = w.gov.government_graph_export();
                let mut truth = w.truth_edges.clone();
                truth.sort();
                graph = Some(GraphCheck {
                    exported_edges: graph_export.len(),
                    ground_truth_edges: truth.len(),
                    identical: graph_export == truth,
                });
            }
        }
        SimulationReport {
            days_completed: self.day,
            encounters: self.encounters,
            diagnoses: self.diagnoses[..self.next_diagnosis].to_vec(),
            detection: detection_audit(&self.truth, &self.notified),
            ground_truth_exposures: self.truth,
            notifications_delivered: self.notified,
            real_messages_delivered: self.real_delivered,
            receive_errors: self.receive_errors,
            max_latency_secs: self.max_latency,
            set_zero_decryptions: self.zero_decryptions,
            set_false_zero_entries: self.false_zero,
            set_response_diagnostics: self.response_diagnostics,
            channel_bytes,
            snooper: snooper_probe(&self.broadcasts),
            relay,
            graph,
            graph_export,
            scenario: self.scenario,
        }
    }
}

impl MessageWorld {
    fn setup(scenario: &Scenario, rng: &mut ChaCha20Rng) -> Result<Self, SimError> {
        let mut grace = Grace::new(scenario.params, scenario.cover_rate, rng)?;
        let mut relay = Relay::new();
        let n = scenario.population;
        let mut users = Vec::with_capacity(n);
        let mut pseudonyms = Vec::with_capacity(n);
        let mut owner = HashMap::with_capacity(n);
        let (mut to_relay, mut to_grace) = (0u64, 0u64);
        for i in 0..n {
            let identity = Identity::from_index(i as u64);
            let (state, blob) = UserMsgState::user_setup(rng, grace.public_key())?;
            to_relay += (identity.as_bytes().len() + blob.as_bytes().len()) as u64;
            let (pseudonym, blob) = relay.relay_register(identity, blob, rng)?;
            to_grace += (Pseudonym::LEN + blob.as_bytes().len()) as u64;
            grace.grace_register(pseudonym, &blob)?;
            users.push(state);
            pseudonyms.push(pseudonym);
            owner.insert(identity, i);
        }
        let cover = grace.cover_clock();
        let next_cover = (0..n).map(|_| cover.next_gap(rng)).collect();
        Ok(MessageWorld {
            grace,
            relay,
            henry: HealthProvider::new(),
            users,
            pseudonyms,
            owner,
            cover,
            next_cover,
            tags: HashMap::new(),
            setup_user_to_relay: to_relay,
            setup_relay_to_grace: to_grace,
            user_to_henry: 0,
            henry_to_grace: 0,
            grace_to_relay: 0,
            relay_to_user: 0,
        })
    }

    /// Upload, certification and resolution. Returns the messages Grace
    /// emitted (first protocol) or queued (second protocol), already tagged.
    fn diagnose(
        &mut self,
        d: Diagnosis,
        params: &crate::model::Params,
        protocol: Protocol,
        rng: &mut ChaCha20Rng,
    ) -> Result<Vec<NotificationMsg>, SimError> {
        let identity = Identity::from_index(d.user as u64);
        let submission = self.users[d.user].submit_diagnosis(d.time, params, None, rng)?;
        self.user_to_henry += submission.as_bytes().len() as u64;
        self.henry.record_positive_test(identity);
        let certified = self.henry.confirm(identity, submission)?;
        self.henry_to_grace += certified.wire_len() as u64;
        let messages = match protocol {
            Protocol::MsgP1 => self.grace.grace_inform(&certified, d.time)?,
            _ => self.grace.grace_record_p2(&certified, d.time)?,
        };
        for m in &messages {
            self.tags.insert((m.pseudonym, m.counter), (d.user, d.time));
        }
        Ok(messages)
    }
}

/// Runs every day of the scenario and returns the report.
pub fn run_scenario(scenario: &Scenario) -> Result<SimulationReport, SimError> {
    let mut sim = Simulation::new(scenario.clone())?;
    while sim.step_day()? {}
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(protocol: Protocol) -> Scenario {
        Scenario {
            population: 40,
            days: 4,
            encounters_per_user_day: 10.0,
            daily_new_infections: 2,
            diagnosis_delay_days: 1,
            ahe_key_bits: 512,
            protocol,
            ..Scenario::default()
        }
    }

    #[test]
    fn every_protocol_meets_its_contracts() {
        for protocol in Protocol::ALL {
            let r = run_scenario(&small(protocol)).unwrap();
            assert!(r.contract_violations().is_empty(), "{protocol}: {:?}", r.contract_violations());
            assert!(!r.ground_truth_exposures.is_empty(), "{protocol}");
        }
    }

    #[test]
    fn protocols_notify_the_same_pairs() {
        let reports: Vec<SimulationReport> =
            Protocol::ALL.iter().map(|p| run_scenario(&small(*p)).unwrap()).collect();
        let keys = |r: &SimulationReport| r.notifications_delivered.keys().copied().collect::<Vec<_>>();
        assert_eq!(keys(&reports[0]), keys(&reports[1]));
        assert_eq!(keys(&reports[0]), keys(&reports[2]));
    }

    #[test]
    fn no_infections_means_no_real_traffic() {
        for protocol in Protocol::ALL {
            let s = Scenario { daily_new_infections: 0, ..small(protocol) };
            let r = run_scenario(&s).unwrap();
            assert_eq!(r.real_messages_delivered, 0);
            assert_eq!(r.set_zero_decryptions, 0);
            assert!(r.notifications_delivered.is_empty());
        }
    }

    #[test]
    fn stepping_matches_a_full_run() {
        let s = small(Protocol::MsgP2);
        let mut sim = Simulation::new(s.clone()).unwrap();
        let mut steps = 0;
        while sim.step_day().unwrap() {
            steps += 1;
        }
        assert_eq!(steps + 1, s.days);
        assert!(!sim.step_day().unwrap());
        assert_eq!(sim.finish().to_text(), run_scenario(&s).unwrap().to_text());
    }

    #[test]
    fn frozen_rotation_is_linkable() {
        for protocol in [Protocol::MsgP1, Protocol::Set] {
            let s = Scenario { rotation_disabled: true, ..small(protocol) };
            let r = run_scenario(&s).unwrap();
            assert!(r.snooper.cross_period_links > 0, "{protocol}");
        }
    }

    #[test]
    fn second_protocol_latency_within_one_tick() {
        let r = run_scenario(&small(Protocol::MsgP2)).unwrap();
        let latency = r.max_latency_secs.expect("real messages were delivered");
        assert!(latency > 0 && latency <= 1800, "{latency}");
        let relay = r.relay.unwrap();
        assert_eq!(relay.min_per_pseudonym, 48 * 4);
        assert_eq!(relay.max_per_pseudonym, 48 * 4);
    }
}
