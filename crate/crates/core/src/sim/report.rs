use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::population::Diagnosis;
use super::probes::{DetectionResult, RelayProbeResult, SnooperResult};
use super::scenario::{Protocol, Scenario};
use crate::set::GraphEdge;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GraphCheck {
    pub exported_edges: usize,
    pub ground_truth_edges: usize,
    pub identical: bool,
}

/// Everything a run produced. A pure function of the scenario.
#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub days_completed: u64,
    pub encounters: u64,
    pub diagnoses: Vec<Diagnosis>,
    /// `(exposed, source)` → day of the latest in-window encounter.
    pub ground_truth_exposures: BTreeMap<(usize, usize), u64>,
    /// `(user, source)` → day the user first learned of it.
    pub notifications_delivered: BTreeMap<(usize, usize), u64>,
    pub real_messages_delivered: u64,
    pub receive_errors: u64,
    /// Longest gap between Grace resolving a diagnosis and the user
    /// receiving the resulting message.
    pub max_latency_secs: Option<u64>,
    pub set_zero_decryptions: u64,
    /// Zero decryptions about a peer that was not diagnosed.
    pub set_false_zero_entries: u64,
    pub set_response_diagnostics: u64,
    pub channel_bytes: BTreeMap<&'static str, u64>,
    pub snooper: SnooperResult,
    pub relay: Option<RelayProbeResult>,
    pub detection: DetectionResult,
    pub graph: Option<GraphCheck>,
    pub graph_export: Vec<GraphEdge>,
}

impl SimulationReport {
    pub fn protocol(&self) -> Protocol {
        self.scenario.protocol
    }

    /// Failed probe contracts; empty for a compliant run.
    pub fn contract_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let params = &self.scenario.params;
        if self.snooper.cross_period_links != 0 {
            v.push(format!("snooper linked {} uid pairs across periods", self.snooper.cross_period_links));
        }
        if self.detection.precision != 1.0 || self.detection.recall != 1.0 {
            v.push(format!(
                "detection precision {:.6} recall {:.6}",
                self.detection.precision, self.detection.recall
            ));
        }
        if self.receive_errors != 0 {
            v.push(format!("{} messages rejected by recipients", self.receive_errors));
        }
        if let Some(relay) = &self.relay {
            if relay.messages > 0 && relay.distinct_lengths != 1 {
                v.push(format!("relay saw {} distinct message lengths", relay.distinct_lengths));
            }
            if relay.tick_regular == Some(false) {
                v.push("per-tick sending is irregular".into());
            }
            if let Some(ks) = relay.ks {
                if ks.p_value <= 0.01 {
                    v.push(format!("cover inter-arrivals rejected as exponential (p = {:.3e})", ks.p_value));
                }
            }
        }
        match (self.protocol(), self.max_latency_secs) {
            (Protocol::MsgP1, Some(l)) if l > 0 => v.push(format!("first-protocol latency {l} s")),
            (Protocol::MsgP2, Some(l)) if l > params.period_secs() => {
                v.push(format!("second-protocol latency {l} s exceeds one tick"))
            }
            _ => {}
        }
        if self.set_false_zero_entries != 0 {
            v.push(format!("{} zero decryptions about undiagnosed peers", self.set_false_zero_entries));
        }
        if let Some(g) = &self.graph {
            if !g.identical {
                v.push(format!(
                    "exported graph ({} edges) differs from ground truth ({} edges)",
                    g.exported_edges, g.ground_truth_edges
                ));
            }
        }
        v
    }

    /// Stable, line-oriented rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "[scenario]");
        w.push_str(&self.scenario.to_text());
        let _ = writeln!(w, "\n[summary]");
        let _ = writeln!(w, "days_completed = {}", self.days_completed);
        let _ = writeln!(w, "encounters = {}", self.encounters);
        let _ = writeln!(w, "diagnoses = {}", self.diagnoses.len());
        let _ = writeln!(w, "ground_truth_pairs = {}", self.ground_truth_exposures.len());
        let _ = writeln!(w, "notified_pairs = {}", self.notifications_delivered.len());
        let d = &self.detection;
        let _ = writeln!(w, "true_positives = {}", d.true_positives);
        let _ = writeln!(w, "false_positives = {}", d.false_positives);
        let _ = writeln!(w, "false_negatives = {}", d.false_negatives);
        let _ = writeln!(w, "precision = {:.6}", d.precision);
        let _ = writeln!(w, "recall = {:.6}", d.recall);
        let _ = writeln!(w, "real_messages_delivered = {}", self.real_messages_delivered);
        let _ = writeln!(w, "receive_errors = {}", self.receive_errors);
        match self.max_latency_secs {
            Some(l) => {
                let _ = writeln!(w, "max_latency_secs = {l}");
            }
            None => {
                let _ = writeln!(w, "max_latency_secs = none");
            }
        }
        if self.protocol() == Protocol::Set {
            let _ = writeln!(w, "set_zero_decryptions = {}", self.set_zero_decryptions);
            let _ = writeln!(w, "set_false_zero_entries = {}", self.set_false_zero_entries);
            let _ = writeln!(w, "set_response_diagnostics = {}", self.set_response_diagnostics);
        }
        let _ = writeln!(w, "\n[probes]");
        for (probe, metric, value) in self.probe_rows() {
            let _ = writeln!(w, "{probe}.{metric} = {value}");
        }
        let violations = self.contract_violations();
        let _ = writeln!(w, "contracts = {}", if violations.is_empty() { "PASS" } else { "FAIL" });
        for v in &violations {
            let _ = writeln!(w, "violation = {v}");
        }
        let _ = writeln!(w, "\n[channel_bytes]");
        for (k, v) in &self.channel_bytes {
            let _ = writeln!(w, "{k} = {v}");
        }
        let _ = writeln!(w, "\n[diagnoses]");
        for x in &self.diagnoses {
            let _ = writeln!(w, "user {} infected_day {} diagnosed_at {}", x.user, x.infected_day, x.time.secs());
        }
        let _ = writeln!(w, "\n[ground_truth_exposures]");
        for ((exposed, source), day) in &self.ground_truth_exposures {
            let _ = writeln!(w, "{exposed} {source} {day}");
        }
        let _ = writeln!(w, "\n[notifications]");
        for ((user, source), day) in &self.notifications_delivered {
            let _ = writeln!(w, "{user} {source} {day}");
        }
        s
    }

    fn probe_rows(&self) -> Vec<(&'static str, &'static str, String)> {
        let mut rows = vec![
            ("snooper", "observations", self.snooper.observations.to_string()),
            ("snooper", "distinct_uids", self.snooper.distinct_uids.to_string()),
            ("snooper", "cross_period_links", self.snooper.cross_period_links.to_string()),
            ("detection", "precision", format!("{:.6}", self.detection.precision)),
            ("detection", "recall", format!("{:.6}", self.detection.recall)),
        ];
        if let Some(r) = &self.relay {
            rows.push(("relay", "messages", r.messages.to_string()));
            rows.push(("relay", "pseudonyms", r.pseudonyms.to_string()));
            rows.push(("relay", "distinct_lengths", r.distinct_lengths.to_string()));
            rows.push(("relay", "min_per_pseudonym", r.min_per_pseudonym.to_string()));
            rows.push(("relay", "max_per_pseudonym", r.max_per_pseudonym.to_string()));
            if let Some(e) = r.expected_per_pseudonym {
                rows.push(("relay", "expected_per_pseudonym", e.to_string()));
            }
            if let Some(t) = r.tick_regular {
                rows.push(("relay", "tick_regular", t.to_string()));
            }
            if let (Some(ks), Some(mean)) = (r.ks, r.fitted_mean_secs) {
                rows.push(("relay", "ks_samples", ks.n.to_string()));
                rows.push(("relay", "ks_fitted_mean_secs", format!("{mean:.3}")));
                rows.push(("relay", "ks_statistic", format!("{:.6}", ks.statistic)));
                rows.push(("relay", "ks_p_value", format!("{:.6}", ks.p_value)));
            }
        }
        if let Some(g) = &self.graph {
            rows.push(("graph", "exported_edges", g.exported_edges.to_string()));
            rows.push(("graph", "ground_truth_edges", g.ground_truth_edges.to_string()));
            rows.push(("graph", "identical", g.identical.to_string()));
        }
        rows
    }

    /// `probe,metric,value` rows with a header.
    pub fn probes_csv(&self) -> String {
        let mut s = String::from("probe,metric,value\n");
        for (probe, metric, value) in self.probe_rows() {
            let _ = writeln!(s, "{probe},{metric},{value}");
        }
        s
    }
}
