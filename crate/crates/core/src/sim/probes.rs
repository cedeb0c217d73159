//! Adversary probes. Each consumes only what that adversary could record.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::scenario::Protocol;
use crate::message::{Pseudonym, RelayLogEntry};
use crate::model::{Params, TimePeriod, Uid, SECONDS_PER_DAY};
use crate::stats::{ks_exponential, KsResult};

/// A beacon overheard by a passive snooper. `user` is ground truth for
/// scoring only; the linkage attack never reads it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BroadcastObservation {
    pub uid: Uid,
    pub period: TimePeriod,
    pub user: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct SnooperResult {
    pub observations: usize,
    pub distinct_uids: usize,
    /// Pairs of distinct periods joined by an identical uid, counted as
    /// `periods_seen - 1` per uid.
    pub cross_period_links: usize,
}

/// Equality-linkage attack: a uid seen in more than one period links them.
pub fn snooper_probe(log: &[BroadcastObservation]) -> SnooperResult {
    let mut periods: HashMap<Uid, HashSet<TimePeriod>> = HashMap::new();
    for obs in log {
        periods.entry(obs.uid).or_default().insert(obs.period);
    }
    SnooperResult {
        observations: log.len(),
        distinct_uids: periods.len(),
        cross_period_links: periods.values().map(|p| p.len() - 1).sum(),
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct RelayProbeResult {
    pub messages: usize,
    pub pseudonyms: usize,
    pub distinct_lengths: usize,
    pub min_per_pseudonym: usize,
    pub max_per_pseudonym: usize,
    /// Second protocol: every pseudonym got exactly one message at every tick.
    pub tick_regular: Option<bool>,
    pub expected_per_pseudonym: Option<usize>,
    /// First protocol: pooled per-pseudonym inter-arrivals against an
    /// exponential with the sample mean.
    pub ks: Option<KsResult>,
    pub fitted_mean_secs: Option<f64>,
}

pub fn relay_distinguisher_probe(
    log: &[RelayLogEntry],
    protocol: Protocol,
    params: &Params,
    days: u64,
) -> RelayProbeResult {
    let lengths: HashSet<usize> = log.iter().map(|e| e.bytes).collect();
    let mut times: BTreeMap<Pseudonym, Vec<u64>> = BTreeMap::new();
    for e in log {
        times.entry(e.pseudonym).or_default().push(e.time.secs());
    }
    let counts: Vec<usize> = times.values().map(Vec::len).collect();
    let mut out = RelayProbeResult {
        messages: log.len(),
        pseudonyms: times.len(),
        distinct_lengths: lengths.len(),
        min_per_pseudonym: counts.iter().copied().min().unwrap_or(0),
        max_per_pseudonym: counts.iter().copied().max().unwrap_or(0),
        ..RelayProbeResult::default()
    };
    match protocol {
        Protocol::MsgP2 => {
            let per_day = params.periods_per_day();
            let expected: Vec<u64> = (0..days)
                .flat_map(|d| (1..=per_day).map(move |k| d * SECONDS_PER_DAY + k * params.period_secs()))
                .collect();
            out.expected_per_pseudonym = Some(expected.len());
            out.tick_regular = Some(times.values_mut().all(|t| {
                t.sort_unstable();
                *t == expected
            }));
        }
        Protocol::MsgP1 => {
            let mut gaps = Vec::with_capacity(log.len());
            for t in times.values_mut() {
                t.sort_unstable();
                gaps.extend(t.windows(2).map(|w| (w[1] - w[0]) as f64));
            }
            if !gaps.is_empty() {
                let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
                out.fitted_mean_secs = Some(mean);
                out.ks = Some(ks_exponential(&gaps, mean));
            }
        }
        Protocol::Set => {}
    }
    out
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DetectionResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall over `(exposed, source)` pairs. Empty sets score 1.
pub fn detection_audit<V>(
    ground_truth: &BTreeMap<(usize, usize), V>,
    notified: &BTreeMap<(usize, usize), V>,
) -> DetectionResult {
    let tp = notified.keys().filter(|k| ground_truth.contains_key(k)).count();
    let fp = notified.len() - tp;
    let fn_ = ground_truth.len() - tp;
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    DetectionResult {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision: ratio(tp, notified.len()),
        recall: ratio(tp, ground_truth.len()),
    }
}
