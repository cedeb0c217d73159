//! Closed-form deployment overheads. Figures use the published per-item byte
//! constants so the published totals can be checked; the artifact's own wire
//! sizes are listed alongside for comparison.

use std::fmt::Write as _;

use crate::crypto::PKE_OVERHEAD;
use crate::message::{NotificationMsg, Pseudonym};
use crate::model::{ContactRecord, Params, SeenUid, Uid};
use crate::set::StatusUpdate;

/// Per-item sizes used by the published estimates.
pub mod published {
    /// Uid plus a 10-byte timestamp.
    pub const SEEN_ENTRY_BYTES: u64 = 26;
    /// Two uids, two shares, a 10-byte timestamp.
    pub const CONTACT_RECORD_BYTES: u64 = 43;
    /// Uid plus a 4-bit indicator, rounded up.
    pub const STATUS_ENTRY_BYTES: u64 = 17;
    /// One 2048-bit ciphertext.
    pub const CIPHERTEXT_BYTES: u64 = 512;
    pub const PSEUDONYM_BYTES: u64 = 3;
    pub const TIMESTAMP_BYTES: u64 = 10;
    /// Pseudonym, counter and masked payload.
    pub const NOTIFICATION_BYTES: u64 = 10;
    /// Relay-side identity record.
    pub const RELAY_IDENTITY_BYTES: u64 = 20;
    pub const SEED_BYTES: u64 = 16;
    pub const UID_BITS: u64 = 128;
    pub const SHARE_BITS: u64 = 4;
    pub const ENCRYPTIONS_PER_SEC: u64 = 89_483;
    pub const PRECOMPUTE_SECS: f64 = 5.66;
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum OverheadProtocol {
    Msg1,
    Msg2,
    Set,
}

impl OverheadProtocol {
    pub const ALL: [OverheadProtocol; 3] = [OverheadProtocol::Msg1, OverheadProtocol::Msg2, OverheadProtocol::Set];

    pub fn as_str(&self) -> &'static str {
        match self {
            OverheadProtocol::Msg1 => "msg1",
            OverheadProtocol::Msg2 => "msg2",
            OverheadProtocol::Set => "set",
        }
    }
}

impl std::str::FromStr for OverheadProtocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "msg1" => Ok(OverheadProtocol::Msg1),
            "msg2" => Ok(OverheadProtocol::Msg2),
            "set" => Ok(OverheadProtocol::Set),
            other => Err(format!("unknown protocol {other:?}; expected msg1, msg2 or set")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Scale {
    pub users: u64,
    pub encounters_per_day: u64,
    pub infections_per_day: u64,
}

impl Scale {
    pub const DEPLOYMENT: Scale = Scale { users: 10_000_000, encounters_per_day: 100, infections_per_day: 50_000 };
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Quantity {
    Bytes(u128),
    Count(u128),
    Seconds(f64),
}

impl Quantity {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Quantity::Bytes(b) | Quantity::Count(b) => b as f64,
            Quantity::Seconds(s) => s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_f64() == 0.0
    }
}

impl std::fmt::Display for Quantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Quantity::Bytes(b) => write!(f, "{b} B ({})", human_bytes(*b)),
            Quantity::Count(c) => write!(f, "{c}"),
            Quantity::Seconds(s) => write!(f, "{s:.3} s"),
        }
    }
}

fn human_bytes(b: u128) -> String {
    let units = [("GB", 1e9), ("MB", 1e6), ("kB", 1e3)];
    let v = b as f64;
    for (unit, scale) in units {
        if v >= scale {
            return format!("{:.2} {unit}", v / scale);
        }
    }
    format!("{b} B")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RowKind {
    Storage,
    Transfer,
    Count,
    Time,
    /// Artifact wire size, for comparison with the published constant.
    Wire,
    Note,
}

/// A quoted figure and its numeric reading.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PublishedFigure {
    pub quoted: &'static str,
    pub value: f64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct OverheadRow {
    pub protocol: OverheadProtocol,
    pub key: &'static str,
    pub quantity: &'static str,
    pub formula: String,
    pub computed: Quantity,
    pub kind: RowKind,
    pub published: Option<PublishedFigure>,
}

impl OverheadRow {
    /// `(computed - published) / published`.
    pub fn deviation(&self) -> Option<f64> {
        self.published
            .filter(|p| p.value != 0.0)
            .map(|p| (self.computed.as_f64() - p.value) / p.value)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct OverheadReport {
    pub scale: Scale,
    pub window_days: u64,
    pub rows: Vec<OverheadRow>,
}

impl OverheadReport {
    pub fn row(&self, protocol: OverheadProtocol, key: &str) -> Option<&OverheadRow> {
        self.rows.iter().find(|r| r.protocol == protocol && r.key == key)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scale: users={} encounters_per_day={} infections_per_day={} window_days={}",
            self.scale.users, self.scale.encounters_per_day, self.scale.infections_per_day, self.window_days
        );
        let _ = writeln!(s, "protocol\tquantity\tformula\tcomputed\tpublished\tdeviation");
        for r in &self.rows {
            let (figure, dev) = match (r.published, r.deviation()) {
                (Some(p), Some(d)) => (p.quoted.to_string(), format!("{:+.2}%", d * 100.0)),
                (Some(p), None) => (p.quoted.to_string(), "-".into()),
                _ => ("-".into(), "-".into()),
            };
            let computed = if r.kind == RowKind::Note { "-".to_string() } else { r.computed.to_string() };
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", r.protocol.as_str(), r.quantity, r.formula, computed, figure, dev);
        }
        s
    }
}

fn fig(quoted: &'static str, value: f64) -> Option<PublishedFigure> {
    Some(PublishedFigure { quoted, value })
}

/// Pure arithmetic over the scale. `protocols` selects which sections appear.
pub fn compute_overhead(params: &Params, scale: Scale, protocols: &[OverheadProtocol]) -> OverheadReport {
    let mut rows = Vec::new();
    for &p in protocols {
        match p {
            OverheadProtocol::Msg1 | OverheadProtocol::Msg2 => message_rows(params, scale, p, &mut rows),
            OverheadProtocol::Set => set_rows(params, scale, &mut rows),
        }
    }
    OverheadReport { scale, window_days: u64::from(params.window_n), rows }
}

fn message_rows(params: &Params, scale: Scale, protocol: OverheadProtocol, rows: &mut Vec<OverheadRow>) {
    use published::*;
    let n = u128::from(params.window_n);
    let per_day = u128::from(params.periods_per_day());
    let users = u128::from(scale.users);
    let enc = u128::from(scale.encounters_per_day);
    let inf = u128::from(scale.infections_per_day);
    let relay = if protocol == OverheadProtocol::Msg1 { "relay (Mary)" } else { "relay (Henry)" };
    let seen = enc * n * u128::from(SEEN_ENTRY_BYTES);
    let messages = users * per_day;
    let mut push = |key, quantity, formula: String, computed, kind, published| {
        rows.push(OverheadRow { protocol, key, quantity, formula, computed, kind, published })
    };
    push("user_seed_storage", "user seed storage", "2 * 16 B".into(), Quantity::Bytes(2 * u128::from(SEED_BYTES)), RowKind::Storage, fig("32 Bytes", 32.0));
    push("user_storage", "user seen-uid storage", format!("{enc} * {n} * {SEEN_ENTRY_BYTES} B"), Quantity::Bytes(seen), RowKind::Storage, fig("about 36 kB", 36_000.0));
    push("user_diagnosis_upload", "user upload on diagnosis", format!("{enc} * {n} * {SEEN_ENTRY_BYTES} B"), Quantity::Bytes(seen), RowKind::Transfer, fig("36kB", 36_000.0));
    push("user_messages_per_day", "user messages received per day", format!("{per_day} periods"), Quantity::Count(per_day), RowKind::Count, fig("48 messages a day", 48.0));
    push("relay_identity_storage", relay, format!("{users} * {RELAY_IDENTITY_BYTES} B"), Quantity::Bytes(users * u128::from(RELAY_IDENTITY_BYTES)), RowKind::Storage, fig("200 MB", 200e6));
    push("relay_messages_per_day", "relay messages forwarded per day", format!("{users} * {per_day}"), Quantity::Count(messages), RowKind::Count, fig("480,000,000 messages a day", 480e6));
    push("relay_transfer_per_day", "relay bytes in (and out) per day", format!("{messages} * {NOTIFICATION_BYTES} B"), Quantity::Bytes(messages * u128::from(NOTIFICATION_BYTES)), RowKind::Transfer, fig("about 5GB", 5e9));
    push("grace_diagnosis_inbound", "Grace diagnosis inbound per day", format!("{inf} * {seen} B"), Quantity::Bytes(inf * seen), RowKind::Transfer, fig("about 1.8GB a day", 1.8e9));
    push("grace_pending_storage", "Grace pending-message storage", format!("{users} * {NOTIFICATION_BYTES} B"), Quantity::Bytes(users * u128::from(NOTIFICATION_BYTES)), RowKind::Storage, fig("about 100MB", 100e6));
    let key_entry = 2 * u128::from(SEED_BYTES) + u128::from(PSEUDONYM_BYTES) + 8;
    push("grace_key_storage", "Grace seed/pseudonym/counter storage", format!("{users} * (2 * 16 + {PSEUDONYM_BYTES} + 8) B"), Quantity::Bytes(users * key_entry), RowKind::Storage, fig("around 32MB", 32e6));
    push("grace_lookup_entries", "Grace lookup-table entries", format!("{n} * {per_day} * {users}"), Quantity::Count(n * per_day * users), RowKind::Count, fig("about 7 billion entries", 7e9));
    push("grace_lookup_bytes_per_entry", "Grace lookup value size", "pseudonym".into(), Quantity::Bytes(u128::from(PSEUDONYM_BYTES)), RowKind::Storage, fig("3 Bytes", 3.0));
    push("grace_lookup_queries_per_day", "Grace lookup queries per day", format!("{inf} * {enc} * {n}"), Quantity::Count(inf * enc * n), RowKind::Count, fig("70,000,000 times a day", 70e6));
    push("wire_seen_entry", "artifact seen-uid entry", "uid 16 B + timestamp 8 B".into(), Quantity::Bytes(SeenUid::WIRE_LEN as u128), RowKind::Wire, None);
    push("wire_diagnosis_upload", "artifact diagnosis upload", format!("4 + {enc} * {n} * {} + {PKE_OVERHEAD} B", SeenUid::WIRE_LEN), Quantity::Bytes(4 + enc * n * SeenUid::WIRE_LEN as u128 + PKE_OVERHEAD as u128), RowKind::Wire, None);
    push("wire_notification", "artifact notification", format!("{} + 8 + 8 B", Pseudonym::LEN), Quantity::Bytes(NotificationMsg::WIRE_LEN as u128), RowKind::Wire, None);
}

fn set_rows(params: &Params, scale: Scale, rows: &mut Vec<OverheadRow>) {
    use published::*;
    let protocol = OverheadProtocol::Set;
    let n = u128::from(params.window_n);
    let users = u128::from(scale.users);
    let enc = u128::from(scale.encounters_per_day);
    let entries = enc * n;
    let encrypt_secs = entries as f64 / ENCRYPTIONS_PER_SEC as f64;
    let mut push = |key, quantity, formula: String, computed, kind, published| {
        rows.push(OverheadRow { protocol, key, quantity, formula, computed, kind, published })
    };
    let stage1_bits = enc * u128::from(UID_BITS + SHARE_BITS);
    push("stage1_transfer", "stage 1 user broadcast per day", format!("{enc} * ({UID_BITS} + {SHARE_BITS}) bits / 8"), Quantity::Bytes(stage1_bits.div_ceil(8)), RowKind::Transfer, fig("1.65kB", 1650.0));
    push("user_storage", "stage 1 user contact storage", format!("{enc} * {n} * {CONTACT_RECORD_BYTES} B"), Quantity::Bytes(entries * u128::from(CONTACT_RECORD_BYTES)), RowKind::Storage, fig("approximately 60 kB", 60_000.0));
    push("stage2_transfer", "stage 2 user status upload per day", format!("{enc} * {STATUS_ENTRY_BYTES} B"), Quantity::Bytes(enc * u128::from(STATUS_ENTRY_BYTES)), RowKind::Transfer, fig("1.7kB", 1700.0));
    push("govt_storage", "stage 2 government storage", format!("{users} * {n} * {enc} * {STATUS_ENTRY_BYTES} B"), Quantity::Bytes(users * n * enc * u128::from(STATUS_ENTRY_BYTES)), RowKind::Storage, fig("230 GB", 230e9));
    push("stage3_payload", "stage 3 user query payload", format!("{enc} * {n} * {CIPHERTEXT_BYTES} B"), Quantity::Bytes(entries * u128::from(CIPHERTEXT_BYTES)), RowKind::Transfer, fig("0.72 MB", 0.72e6));
    push("stage3_table_note", "NOTE stage 3 user transfer in the summary table", "table prints half the computed payload".into(), Quantity::Bytes(0), RowKind::Note, fig("0.36 MB", 0.36e6));
    push("stage3_encryptions", "stage 3 encryptions per day", format!("{enc} * {n}"), Quantity::Count(entries), RowKind::Count, fig("1,400 2048-bit encryptions", 1400.0));
    push("stage3_encrypt_time", "stage 3 encryption time", format!("{entries} / {ENCRYPTIONS_PER_SEC} enc/s"), Quantity::Seconds(encrypt_secs), RowKind::Time, fig("less than a second", 1.0));
    push("stage3_total_time", "stage 3 precompute plus encryption", format!("{PRECOMPUTE_SECS} s + {entries} / {ENCRYPTIONS_PER_SEC} enc/s"), Quantity::Seconds(PRECOMPUTE_SECS + encrypt_secs), RowKind::Time, fig("7s", 7.0));
    push("wire_contact_record", "artifact contact record", "2 * (16 + 1) + 8 B".into(), Quantity::Bytes(ContactRecord::WIRE_LEN as u128), RowKind::Wire, None);
    push("wire_status_update", "artifact status upload per day", format!("8 + {enc} * {} B", StatusUpdate::ENTRY_LEN), Quantity::Bytes(8 + enc * StatusUpdate::ENTRY_LEN as u128), RowKind::Wire, None);
    push("wire_query", "artifact stage 3 query at 2048 bits", format!("8 + {entries} * ({} + 512) B", Uid::LEN), Quantity::Bytes(8 + entries * (Uid::LEN as u128 + 512)), RowKind::Wire, None);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deployment() -> OverheadReport {
        compute_overhead(&Params::default(), Scale::DEPLOYMENT, &OverheadProtocol::ALL)
    }

    fn bytes(r: &OverheadReport, p: OverheadProtocol, key: &str) -> u128 {
        match r.row(p, key).unwrap().computed {
            Quantity::Bytes(b) | Quantity::Count(b) => b,
            Quantity::Seconds(_) => panic!("{key} is a time"),
        }
    }

    #[test]
    fn published_totals() {
        let r = deployment();
        assert_eq!(bytes(&r, OverheadProtocol::Msg1, "user_storage"), 36_400);
        assert_eq!(bytes(&r, OverheadProtocol::Set, "user_storage"), 60_200);
        assert_eq!(bytes(&r, OverheadProtocol::Set, "stage2_transfer"), 1_700);
        assert_eq!(bytes(&r, OverheadProtocol::Set, "stage3_payload"), 716_800);
        assert_eq!(bytes(&r, OverheadProtocol::Set, "govt_storage"), 238_000_000_000);
        assert_eq!(bytes(&r, OverheadProtocol::Msg1, "grace_diagnosis_inbound"), 1_820_000_000);
        assert_eq!(bytes(&r, OverheadProtocol::Msg2, "grace_lookup_entries"), 6_720_000_000);
        assert_eq!(bytes(&r, OverheadProtocol::Msg2, "relay_messages_per_day"), 480_000_000);
        assert_eq!(bytes(&r, OverheadProtocol::Set, "stage1_transfer"), 1_650);
    }

    #[test]
    fn zero_encounters_zero_user_transfer() {
        let scale = Scale { users: 1, encounters_per_day: 0, infections_per_day: 0 };
        let r = compute_overhead(&Params::default(), scale, &OverheadProtocol::ALL);
        for row in r.rows.iter().filter(|r| r.kind == RowKind::Transfer && !r.key.starts_with("relay")) {
            assert!(row.computed.is_zero(), "{}", row.key);
        }
    }

    #[test]
    fn text_lists_every_row_once() {
        let r = deployment();
        let text = r.to_text();
        assert_eq!(text.lines().count(), 2 + r.rows.len());
        assert!(text.contains("0.36 MB"));
    }
}
