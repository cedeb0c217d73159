//! Scripted inputs shared by all protocols: who meets whom, and who is
//! diagnosed when. Each is drawn from its own ChaCha stream so every
//! protocol sees identical events for the same seed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use super::scenario::{Scenario, ScenarioError, DIAGNOSIS_JITTER_DAYS};
use crate::model::{Timestamp, SECONDS_PER_DAY};

const ENCOUNTER_STREAM_BASE: u64 = 1 << 32;
const INFECTION_STREAM: u64 = 7;
pub(crate) const PROTOCOL_STREAM: u64 = 1;

/// A qualifying contact between two users.
#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub struct EncounterEvent {
    pub time: Timestamp,
    pub user_a: usize,
    pub user_b: usize,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Poisson pairing: the day's encounter count is Poisson with mean
/// `population * encounters_per_user_day / 2`, each between two distinct
/// uniformly chosen users at a uniform time. Sorted by time.
pub fn generate_encounters(scenario: &Scenario, day: u64) -> Result<Vec<EncounterEvent>, ScenarioError> {
    if scenario.population < 2 {
        return Err(ScenarioError::Invalid("population must be at least 2".into()));
    }
    let mean_total = scenario.population as f64 * scenario.encounters_per_user_day / 2.0;
    if mean_total <= 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(scenario.seed, ENCOUNTER_STREAM_BASE + day);
    let total = Poisson::new(mean_total)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?
        .sample(&mut rng) as usize;
    let n = scenario.population;
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let time = Timestamp(day * SECONDS_PER_DAY + rng.gen_range(0..SECONDS_PER_DAY));
        out.push(EncounterEvent { time, user_a: a, user_b: b });
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Diagnosis {
    pub user: usize,
    pub infected_day: u64,
    pub time: Timestamp,
}

/// Infections and the diagnoses that fall inside the run, ordered by time.
///
/// Each day `daily_new_infections` previously uninfected users are infected.
/// Diagnosis follows after the configured delay. Diagnoses on one day land in
/// distinct rotation periods (while the day has enough of them), strictly
/// inside the period, so a per-period sender can flush each before the next.
pub fn diagnosis_schedule(scenario: &Scenario) -> Vec<Diagnosis> {
    let mut rng = stream_rng(scenario.seed, INFECTION_STREAM);
    let n = scenario.population;
    let mut healthy: Vec<usize> = (0..n).collect();
    let mut by_day: Vec<Vec<(usize, u64)>> = vec![Vec::new(); scenario.days as usize];
    let max_delay = u64::from(scenario.params.window_n) - 1;
    for day in 0..scenario.days {
        let k = (scenario.daily_new_infections as usize).min(healthy.len());
        let mut picked: Vec<usize> = sample(&mut rng, healthy.len(), k).into_vec();
        picked.sort_unstable_by(|a, b| b.cmp(a));
        let mut infected: Vec<usize> = picked.into_iter().map(|i| healthy.swap_remove(i)).collect();
        infected.sort_unstable();
        for user in infected {
            let lo = scenario.diagnosis_delay_days.saturating_sub(DIAGNOSIS_JITTER_DAYS);
            let hi = scenario.diagnosis_delay_days + DIAGNOSIS_JITTER_DAYS;
            let delay = rng.gen_range(lo..=hi).min(max_delay);
            let diag_day = day + delay;
            if diag_day < scenario.days {
                by_day[diag_day as usize].push((user, day));
            }
        }
    }
    let per_day = scenario.params.periods_per_day();
    let period_secs = scenario.params.period_secs();
    let mut out = Vec::new();
    for (day, entries) in by_day.into_iter().enumerate() {
        let slots: Vec<u64> = if entries.len() as u64 <= per_day {
            sample(&mut rng, per_day as usize, entries.len())
                .into_iter()
                .map(|s| s as u64)
                .collect()
        } else {
            (0..entries.len() as u64).map(|i| i % per_day).collect()
        };
        for ((user, infected_day), slot) in entries.into_iter().zip(slots) {
            let offset = rng.gen_range(1..period_secs);
            let time = Timestamp(day as u64 * SECONDS_PER_DAY + slot * period_secs + offset);
            out.push(Diagnosis { user, infected_day, time });
        }
    }
    out.sort_by_key(|d| (d.time, d.user));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn deterministic_per_seed_and_day() {
        let s = Scenario::default();
        assert_eq!(generate_encounters(&s, 3).unwrap(), generate_encounters(&s, 3).unwrap());
        assert_ne!(generate_encounters(&s, 3).unwrap(), generate_encounters(&s, 4).unwrap());
    }

    #[test]
    fn mean_per_user_matches_rate() {
        let s = Scenario { population: 200, encounters_per_user_day: 100.0, ..Scenario::default() };
        let ev = generate_encounters(&s, 0).unwrap();
        let per_user = 2.0 * ev.len() as f64 / 200.0;
        assert!((per_user - 100.0).abs() / 100.0 < 0.05, "{per_user}");
        assert!(ev.iter().all(|e| e.user_a != e.user_b && e.time.day() == 0));
        assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn zero_rate_is_empty() {
        let s = Scenario { encounters_per_user_day: 0.0, ..Scenario::default() };
        assert!(generate_encounters(&s, 0).unwrap().is_empty());
    }

    #[test]
    fn diagnoses_use_distinct_periods_within_a_day() {
        let s = Scenario { daily_new_infections: 5, ..Scenario::default() };
        let d = diagnosis_schedule(&s);
        assert!(!d.is_empty());
        let users: HashSet<usize> = d.iter().map(|x| x.user).collect();
        assert_eq!(users.len(), d.len());
        let periods: HashSet<u64> = d.iter().map(|x| x.time.period(&s.params).0).collect();
        assert_eq!(periods.len(), d.len());
        for x in &d {
            let delay = x.time.day() - x.infected_day;
            assert!((3..=7).contains(&delay));
            assert_ne!(x.time.secs() % s.params.period_secs(), 0);
        }
        assert_eq!(d, diagnosis_schedule(&s));
    }

    #[test]
    fn infections_stop_when_everyone_is_infected() {
        let s = Scenario { population: 3, daily_new_infections: 2, days: 14, ..Scenario::default() };
        let users: HashSet<usize> = diagnosis_schedule(&s).iter().map(|x| x.user).collect();
        assert!(users.len() <= 3);
    }
}
