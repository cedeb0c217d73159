use std::fmt::Write as _;
use std::str::FromStr;

use crate::crypto::SUPPORTED_MODULUS_BITS;
use crate::model::Params;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub enum Protocol {
    MsgP1,
    MsgP2,
    Set,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::MsgP1, Protocol::MsgP2, Protocol::Set];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::MsgP1 => "MSG_P1",
            Protocol::MsgP2 => "MSG_P2",
            Protocol::Set => "SET",
        }
    }

    pub fn is_message(&self) -> bool {
        !matches!(self, Protocol::Set)
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MSG_P1" => Ok(Protocol::MsgP1),
            "MSG_P2" => Ok(Protocol::MsgP2),
            "SET" => Ok(Protocol::Set),
            other => Err(format!("unknown protocol {other:?}; expected MSG_P1, MSG_P2 or SET")),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A complete, self-describing simulation input.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub population: usize,
    pub days: u64,
    pub encounters_per_user_day: f64,
    pub daily_new_infections: u32,
    pub protocol: Protocol,
    pub params: Params,
    /// Mean seconds between cover messages per pseudonym.
    pub cover_rate: f64,
    pub ahe_key_bits: usize,
    /// Mean days from infection to diagnosis; actual delay is uniform within
    /// two days of it, clamped to the window.
    pub diagnosis_delay_days: u64,
    /// Diagnosed users stop meeting people.
    pub isolation: bool,
    /// Positive control for the linkage probe: users never rotate uids.
    pub rotation_disabled: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 1,
            population: 200,
            days: 14,
            encounters_per_user_day: 20.0,
            daily_new_infections: 2,
            protocol: Protocol::MsgP1,
            params: Params::default(),
            cover_rate: 1800.0,
            ahe_key_bits: 2048,
            diagnosis_delay_days: 5,
            isolation: true,
            rotation_disabled: false,
        }
    }
}

pub const DIAGNOSIS_JITTER_DAYS: u64 = 2;

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.population < 2 {
            return invalid("population must be at least 2");
        }
        if self.population > (1 << 20) {
            return invalid("population above 2^20 is not supported");
        }
        if self.days < 1 {
            return invalid("days must be at least 1");
        }
        if !(self.encounters_per_user_day.is_finite() && self.encounters_per_user_day >= 0.0) {
            return invalid("encounters_per_user_day must be non-negative");
        }
        if !(self.cover_rate.is_finite() && self.cover_rate > 0.0) {
            return invalid("cover_rate must be positive");
        }
        if !SUPPORTED_MODULUS_BITS.contains(&self.ahe_key_bits) {
            return Err(ScenarioError::Invalid(format!(
                "ahe_key_bits must be one of {SUPPORTED_MODULUS_BITS:?}"
            )));
        }
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut s = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError::Parse { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
                v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
            }
            let applied: Result<(), String> = (|| {
                match key {
                    "seed" => s.seed = num(key, value)?,
                    "population" => s.population = num(key, value)?,
                    "days" => s.days = num(key, value)?,
                    "encounters_per_user_day" => s.encounters_per_user_day = num(key, value)?,
                    "daily_new_infections" => s.daily_new_infections = num(key, value)?,
                    "protocol" => s.protocol = value.parse()?,
                    "window_n" => s.params.window_n = num(key, value)?,
                    "period_t" => s.params.period_t = num(key, value)?,
                    "contact_distance_x" => s.params.contact_distance_x = num(key, value)?,
                    "contact_duration_s" => s.params.contact_duration_s = num(key, value)?,
                    "cover_rate" => s.cover_rate = num(key, value)?,
                    "ahe_key_bits" => s.ahe_key_bits = num(key, value)?,
                    "diagnosis_delay_days" => s.diagnosis_delay_days = num(key, value)?,
                    "isolation" => s.isolation = num(key, value)?,
                    "rotation_disabled" => s.rotation_disabled = num(key, value)?,
                    other => return Err(format!("unknown key {other:?}")),
                }
                Ok(())
            })();
            applied.map_err(err)?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Canonical text form; `parse(to_text())` reproduces the scenario.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("population", self.population.to_string());
        kv("days", self.days.to_string());
        kv("encounters_per_user_day", self.encounters_per_user_day.to_string());
        kv("daily_new_infections", self.daily_new_infections.to_string());
        kv("protocol", self.protocol.to_string());
        kv("window_n", p.window_n.to_string());
        kv("period_t", p.period_t.to_string());
        kv("contact_distance_x", p.contact_distance_x.to_string());
        kv("contact_duration_s", p.contact_duration_s.to_string());
        kv("cover_rate", self.cover_rate.to_string());
        kv("ahe_key_bits", self.ahe_key_bits.to_string());
        kv("diagnosis_delay_days", self.diagnosis_delay_days.to_string());
        kv("isolation", self.isolation.to_string());
        kv("rotation_disabled", self.rotation_disabled.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_and_round_trips() {
        let text = "# desk run\nseed = 9\npopulation = 50\nprotocol = SET\n\nwindow_n = 7 # shorter\nisolation = false\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.population, 50);
        assert_eq!(s.protocol, Protocol::Set);
        assert_eq!(s.params.window_n, 7);
        assert!(!s.isolation);
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        assert_eq!(
            Scenario::parse("seed = 1\npopulation 5\n"),
            Err(ScenarioError::Parse { line: 2, message: "expected `key = value`, found \"population 5\"".into() })
        );
        assert!(matches!(Scenario::parse("colour = red"), Err(ScenarioError::Parse { line: 1, .. })));
        assert!(matches!(Scenario::parse("days = -1"), Err(ScenarioError::Parse { line: 1, .. })));
        assert!(matches!(Scenario::parse("protocol = MSG_P3"), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn validation() {
        assert!(matches!(Scenario::parse("population = 1"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(Scenario::parse("days = 0"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(Scenario::parse("cover_rate = 0"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(Scenario::parse("ahe_key_bits = 999"), Err(ScenarioError::Invalid(_))));
        assert!(matches!(Scenario::parse("period_t = 7"), Err(ScenarioError::Invalid(_))));
        Scenario::default().validate().unwrap();
    }
}
