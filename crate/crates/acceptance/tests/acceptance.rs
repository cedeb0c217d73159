//! Exit criteria. Each test prints one `criterion N ... PASS|FAIL` line to
//! the real stdout (bypassing libtest capture) and then asserts it.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use contact_trace::crypto::ahe_keygen;
use contact_trace::model::Params;
use contact_trace::overhead::{compute_overhead, OverheadProtocol, OverheadReport, Quantity, Scale};
use contact_trace::set::graph_to_text;
use contact_trace::sim::{run_scenario, Protocol, Scenario, SimError, Simulation, SimulationReport};
use num_bigint::RandBigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

// Overhead reproduction.
const OVERHEAD_STORAGE_TOL: f64 = 0.02;
const OVERHEAD_STAGE3_TOL: f64 = 0.01;
const OVERHEAD_SERVER_TOL: f64 = 0.05;
const OVERHEAD_RUNTIME: Duration = Duration::from_secs(1);

// Detection exactness.
const DETECTION_SEEDS: u64 = 20;
const DETECTION_BUDGET: Duration = Duration::from_secs(120);
const TEST_KEY_BITS: usize = 1024;

// Equality oracle.
const ORACLE_KEYS: u64 = 10;
const ADDITIVITY_TRIALS: usize = 1000;
const ORACLE_RUNTIME: Duration = Duration::from_secs(30);

// Relay indistinguishability.
const KS_ALPHA: f64 = 0.01;
const KS_MIN_SAMPLES: usize = 10_000;
const TICKS_PER_DAY: usize = 48;

fn report_line(n: u8, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n} {name}: {verdict} ({detail})\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn detection_scenario(seed: u64, protocol: Protocol) -> Scenario {
    Scenario {
        seed,
        population: 200,
        days: 14,
        encounters_per_user_day: 20.0,
        daily_new_infections: 2,
        protocol,
        ahe_key_bits: TEST_KEY_BITS,
        ..Scenario::default()
    }
}

struct MessageRuns {
    first: Vec<SimulationReport>,
    second: Vec<SimulationReport>,
    elapsed: Duration,
}

fn message_runs() -> &'static MessageRuns {
    static RUNS: OnceLock<MessageRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let run = |p| {
            (1..=DETECTION_SEEDS)
                .map(|seed| run_scenario(&detection_scenario(seed, p)).expect("valid scenario"))
                .collect()
        };
        let first = run(Protocol::MsgP1);
        let second = run(Protocol::MsgP2);
        MessageRuns { first, second, elapsed: start.elapsed() }
    })
}

struct SetBudgetRun {
    /// Reports for every scenario started, complete or not.
    reports: Vec<SimulationReport>,
    completed_scenarios: u64,
    days_done: u64,
    /// Cumulative window-fill weight of simulated days; day `d` costs `min(d, N-1) + 1`.
    work_done: u64,
    elapsed: Duration,
}

fn day_weight(day: u64, window: u64) -> u64 {
    day.min(window - 1) + 1
}

/// Set-protocol share of the detection criterion: scenarios are stepped a
/// day at a time while the next day's projected cost fits in the time left
/// after the message runs.
fn set_budget_run() -> &'static SetBudgetRun {
    static RUN: OnceLock<SetBudgetRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let budget = DETECTION_BUDGET.saturating_sub(message_runs().elapsed);
        let start = Instant::now();
        let mut out = SetBudgetRun {
            reports: Vec::new(),
            completed_scenarios: 0,
            days_done: 0,
            work_done: 0,
            elapsed: Duration::ZERO,
        };
        'seeds: for seed in 1..=DETECTION_SEEDS {
            if start.elapsed() >= budget {
                break;
            }
            let scenario = detection_scenario(seed, Protocol::Set);
            let window = u64::from(scenario.params.window_n);
            let mut sim = Simulation::new(scenario).expect("valid scenario");
            loop {
                let day = sim.day();
                let more = sim.step_day().expect("set run");
                out.days_done += 1;
                out.work_done += day_weight(day, window);
                if !more {
                    out.completed_scenarios += 1;
                    out.reports.push(sim.finish());
                    break;
                }
                let per_weight = start.elapsed().as_secs_f64() / out.work_done as f64;
                let next = per_weight * day_weight(sim.day(), window) as f64;
                if start.elapsed().as_secs_f64() + next > budget.as_secs_f64() {
                    out.reports.push(sim.finish());
                    break 'seeds;
                }
            }
        }
        out.elapsed = start.elapsed();
        out
    })
}

fn graph_run() -> &'static SimulationReport {
    static RUN: OnceLock<SimulationReport> = OnceLock::new();
    RUN.get_or_init(|| {
        let s = Scenario {
            seed: 8,
            population: 50,
            days: 3,
            encounters_per_user_day: 20.0,
            daily_new_infections: 2,
            diagnosis_delay_days: 1,
            protocol: Protocol::Set,
            ahe_key_bits: TEST_KEY_BITS,
            ..Scenario::default()
        };
        run_scenario(&s).expect("valid scenario")
    })
}

fn determinism_scenarios() -> Vec<Scenario> {
    vec![
        detection_scenario(9, Protocol::MsgP1),
        detection_scenario(9, Protocol::MsgP2),
        Scenario {
            seed: 9,
            population: 20,
            days: 2,
            encounters_per_user_day: 10.0,
            daily_new_infections: 2,
            diagnosis_delay_days: 0,
            protocol: Protocol::Set,
            ahe_key_bits: TEST_KEY_BITS,
            ..Scenario::default()
        },
    ]
}

type RunPair = (SimulationReport, SimulationReport);

fn determinism_runs() -> &'static Vec<RunPair> {
    static RUNS: OnceLock<Vec<RunPair>> = OnceLock::new();
    RUNS.get_or_init(|| {
        determinism_scenarios()
            .iter()
            .map(|s| (run_scenario(s).expect("valid"), run_scenario(s).expect("valid")))
            .collect()
    })
}

fn rotation_controls() -> &'static Vec<SimulationReport> {
    static RUNS: OnceLock<Vec<SimulationReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        Protocol::ALL
            .iter()
            .map(|&protocol| {
                let s = Scenario {
                    seed: 5,
                    population: 12,
                    days: 2,
                    encounters_per_user_day: 8.0,
                    protocol,
                    rotation_disabled: true,
                    ahe_key_bits: TEST_KEY_BITS,
                    ..Scenario::default()
                };
                run_scenario(&s).expect("valid")
            })
            .collect()
    })
}

fn set_reports() -> Vec<&'static SimulationReport> {
    let mut all: Vec<&SimulationReport> = set_budget_run().reports.iter().collect();
    all.push(graph_run());
    for (a, b) in determinism_runs() {
        if a.scenario.protocol == Protocol::Set {
            all.push(a);
            all.push(b);
        }
    }
    all
}

fn within(report: &OverheadReport, p: OverheadProtocol, key: &str, expect: u128, tol: f64) -> Result<String, String> {
    let row = report.row(p, key).ok_or(format!("missing row {key}"))?;
    let Quantity::Bytes(b) = row.computed else { return Err(format!("{key} not in bytes")) };
    let dev = row.deviation().ok_or(format!("{key} has no published figure"))?;
    let quoted = row.published.map(|f| f.quoted).unwrap_or("-");
    let msg = format!("{key}={b} vs {quoted:?} {:+.2}%", dev * 100.0);
    if b != expect {
        return Err(format!("{msg}, expected {expect}"));
    }
    if dev.abs() > tol {
        return Err(format!("{msg} outside ±{:.0}%", tol * 100.0));
    }
    Ok(msg)
}

#[test]
fn criterion_1_overhead_reproduction() {
    let start = Instant::now();
    let report = compute_overhead(&Params::default(), Scale::DEPLOYMENT, &OverheadProtocol::ALL);
    let table = report.to_text();
    let elapsed = start.elapsed();

    use OverheadProtocol::*;
    let checks = [
        within(&report, Msg1, "user_storage", 36_400, OVERHEAD_STORAGE_TOL),
        within(&report, Set, "user_storage", 60_200, OVERHEAD_STORAGE_TOL),
        within(&report, Set, "stage2_transfer", 1_700, 0.0),
        within(&report, Set, "stage3_payload", 716_800, OVERHEAD_STAGE3_TOL),
        within(&report, Set, "govt_storage", 238_000_000_000, OVERHEAD_SERVER_TOL),
        within(&report, Msg1, "grace_diagnosis_inbound", 1_820_000_000, OVERHEAD_SERVER_TOL),
    ];
    let mut failures: Vec<String> = checks.iter().filter_map(|c| c.clone().err()).collect();
    if report.row(Set, "stage3_table_note").is_none() || !table.contains("0.36 MB") {
        failures.push("table discrepancy note missing".into());
    }
    if elapsed >= OVERHEAD_RUNTIME {
        failures.push(format!("took {elapsed:?}"));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        let ok: Vec<String> = checks.into_iter().filter_map(Result::ok).collect();
        format!("{}; {:.0} ms", ok.join("; "), elapsed.as_secs_f64() * 1e3)
    } else {
        failures.join("; ")
    };
    report_line(1, "overhead reproduction", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_detection_exactness() {
    let msg = message_runs();
    let set = set_budget_run();
    let elapsed = msg.elapsed + set.elapsed;
    let exact = |r: &SimulationReport| r.detection.precision == 1.0 && r.detection.recall == 1.0;
    let mut failures = Vec::new();
    for (label, runs) in [("MSG_P1", &msg.first), ("MSG_P2", &msg.second)] {
        let bad: Vec<u64> = runs.iter().filter(|r| !exact(r)).map(|r| r.scenario.seed).collect();
        if runs.len() as u64 != DETECTION_SEEDS || !bad.is_empty() {
            failures.push(format!("{label} inexact seeds {bad:?}"));
        }
    }
    let bad_set: Vec<u64> = set.reports.iter().filter(|r| !exact(r)).map(|r| r.scenario.seed).collect();
    if !bad_set.is_empty() {
        failures.push(format!("SET inexact seeds {bad_set:?}"));
    }
    let window = u64::from(Params::default().window_n);
    let per_scenario: u64 = (0..14).map(|d| day_weight(d, window)).sum();
    let total_work = per_scenario * DETECTION_SEEDS;
    if set.completed_scenarios < DETECTION_SEEDS {
        let projected = set.elapsed.as_secs_f64() * total_work as f64 / set.work_done.max(1) as f64;
        failures.push(format!(
            "SET finished {} of {DETECTION_SEEDS} scenarios ({} of {} scenario-days) inside the {}s budget; \
             projected SET runtime {:.0} min",
            set.completed_scenarios,
            set.days_done,
            14 * DETECTION_SEEDS,
            DETECTION_BUDGET.as_secs(),
            projected / 60.0
        ));
    }
    if elapsed > DETECTION_BUDGET + Duration::from_secs(30) {
        failures.push(format!("total {:.0}s", elapsed.as_secs_f64()));
    }
    let pairs: usize = msg.first.iter().map(|r| r.ground_truth_exposures.len()).sum();
    let pass = failures.is_empty();
    let detail = format!(
        "message runs {:.1}s, {pairs} exposure pairs over {DETECTION_SEEDS} MSG_P1 seeds; SET {:.0}s{}{}",
        msg.elapsed.as_secs_f64(),
        set.elapsed.as_secs_f64(),
        if pass { "" } else { "; " },
        failures.join("; ")
    );
    report_line(2, "detection exactness", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_equality_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut keys = Vec::new();
    let mut wrong = Vec::new();
    for k in 0..ORACLE_KEYS {
        let (pk, sk) = ahe_keygen(TEST_KEY_BITS, &mut rng).expect("keygen");
        for a in 0u64..16 {
            let ca = pk.encrypt_u64(a, &mut rng).unwrap();
            for b in 0u64..16 {
                let cb = pk.encrypt_u64(b, &mut rng).unwrap();
                let d = pk.blinded_difference(&ca, &cb, &mut rng).unwrap();
                if sk.decrypt_is_zero(&d).unwrap() != (a == b) {
                    wrong.push(format!("key {k} pair ({a},{b})"));
                }
            }
        }
        keys.push((pk, sk));
    }
    let mut additivity_failures = 0;
    for i in 0..ADDITIVITY_TRIALS {
        let (pk, sk) = &keys[i % keys.len()];
        let n = pk.modulus();
        let a = rng.gen_biguint_below(n);
        let b = rng.gen_biguint_below(n);
        let sum = pk.add(&pk.encrypt(&a, &mut rng).unwrap(), &pk.encrypt(&b, &mut rng).unwrap()).unwrap();
        if sk.decrypt(&sum).unwrap() != (a + b) % n {
            additivity_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = wrong.is_empty() && additivity_failures == 0 && elapsed < ORACLE_RUNTIME;
    let detail = format!(
        "{} equality pairs wrong of {}, {additivity_failures} of {ADDITIVITY_TRIALS} sums wrong, {:.1}s at {TEST_KEY_BITS} bits",
        wrong.len(),
        ORACLE_KEYS * 256,
        elapsed.as_secs_f64()
    );
    report_line(3, "AHE equality oracle", pass, &detail);
    assert!(pass, "{detail} {wrong:?}");
}

#[test]
fn criterion_4_no_false_zero() {
    let reports = set_reports();
    let entries: u64 = reports.iter().map(|r| r.set_false_zero_entries).sum();
    let zeros: u64 = reports.iter().map(|r| r.set_zero_decryptions).sum();
    let pass = entries == 0 && zeros > 0;
    let detail = format!("{entries} zero decryptions about undiagnosed peers, {zeros} zeros total over {} set runs", reports.len());
    report_line(4, "zero false positives", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_snooper_unlinkability() {
    let mut compliant: Vec<&SimulationReport> = message_runs().first.iter().chain(&message_runs().second).collect();
    compliant.extend(set_reports());
    let linked: Vec<String> = compliant
        .iter()
        .filter(|r| r.snooper.cross_period_links != 0)
        .map(|r| format!("{} seed {}", r.scenario.protocol, r.scenario.seed))
        .collect();
    let controls = rotation_controls();
    let blind: Vec<Protocol> =
        controls.iter().filter(|r| r.snooper.cross_period_links == 0).map(|r| r.scenario.protocol).collect();
    let pass = linked.is_empty() && blind.is_empty();
    let control_links: Vec<String> =
        controls.iter().map(|r| format!("{}={}", r.scenario.protocol, r.snooper.cross_period_links)).collect();
    let detail = format!(
        "{} compliant runs with links {linked:?}; control links {}",
        compliant.len(),
        control_links.join(" ")
    );
    report_line(5, "snooper unlinkability", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_relay_indistinguishability() {
    let runs = message_runs();
    let mut failures = Vec::new();
    let mut min_p = f64::INFINITY;
    let mut min_samples = usize::MAX;
    for r in runs.first.iter().chain(&runs.second) {
        let relay = r.relay.expect("message run");
        if relay.distinct_lengths != 1 {
            failures.push(format!("{} seed {} lengths {}", r.scenario.protocol, r.scenario.seed, relay.distinct_lengths));
        }
    }
    for r in &runs.second {
        let relay = r.relay.unwrap();
        let expected = TICKS_PER_DAY * r.scenario.days as usize;
        if relay.min_per_pseudonym != expected || relay.max_per_pseudonym != expected || relay.tick_regular != Some(true) {
            failures.push(format!(
                "MSG_P2 seed {} per-pseudonym {}..{} vs {expected}",
                r.scenario.seed, relay.min_per_pseudonym, relay.max_per_pseudonym
            ));
        }
    }
    for r in &runs.first {
        match r.relay.unwrap().ks {
            Some(ks) => {
                min_p = min_p.min(ks.p_value);
                min_samples = min_samples.min(ks.n);
                if ks.n < KS_MIN_SAMPLES || ks.p_value <= KS_ALPHA {
                    failures.push(format!("MSG_P1 seed {} KS n={} p={:.4}", r.scenario.seed, ks.n, ks.p_value));
                }
            }
            None => failures.push(format!("MSG_P1 seed {} has no KS result", r.scenario.seed)),
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("1 length in all runs; 48/day/pseudonym; KS min p {min_p:.4} on >= {min_samples} gaps")
    } else {
        failures.join("; ")
    };
    report_line(6, "relay indistinguishability", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_latency_bound() {
    let runs = message_runs();
    let tick = Params::default().period_secs();
    let first: Vec<u64> = runs.first.iter().filter_map(|r| r.max_latency_secs).collect();
    let second: Vec<u64> = runs.second.iter().filter_map(|r| r.max_latency_secs).collect();
    let first_max = first.iter().copied().max();
    let second_max = second.iter().copied().max();
    let pass = first_max == Some(0)
        && second_max.is_some_and(|m| m <= tick)
        && first.len() == runs.first.len()
        && second.len() == runs.second.len();
    let detail = format!("first protocol max {first_max:?} s, second protocol max {second_max:?} s vs tick {tick} s");
    report_line(7, "latency bound", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_graph_fidelity() {
    let r = graph_run();
    let g = r.graph.expect("set run");
    let pass = g.identical && g.exported_edges > 0;
    let detail = format!(
        "{} exported edges, {} ground-truth edges, {} encounters, identical={}",
        g.exported_edges, g.ground_truth_edges, r.encounters, g.identical
    );
    report_line(8, "graph fidelity", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_9_determinism() {
    let mut failures = Vec::new();
    for (a, b) in determinism_runs() {
        let same = a.to_text() == b.to_text()
            && a.probes_csv() == b.probes_csv()
            && graph_to_text(&a.graph_export) == graph_to_text(&b.graph_export);
        if !same {
            failures.push(a.scenario.protocol.to_string());
        }
    }
    let pass = failures.is_empty();
    let detail = format!("{} scenario pairs compared, differing: {failures:?}", determinism_runs().len());
    report_line(9, "determinism", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn scenario_errors_surface() {
    let bad = Scenario { population: 1, ..Scenario::default() };
    assert!(matches!(run_scenario(&bad), Err(SimError::Scenario(_))));
}
