//! C ABI for the contact-trace core.
//!
//! Every function returns a [`CtStatus`]. On failure the thread-local
//! message from [`ct_last_error`] explains why. Handles are opaque and must
//! be released with their matching `_free` function. Byte outputs follow one
//! convention: the required length is always written to `out_len`, and
//! `CT_STATUS_BUFFER_TOO_SMALL` is returned when `out_cap` is insufficient.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use contact_trace::crypto::{ahe_keygen, ctr_prg, AhePublicKey, AheSecretKey, Seed};
use contact_trace::model::Params;
use contact_trace::overhead::{compute_overhead, OverheadProtocol, Scale};
use contact_trace::sim::{run_scenario, Scenario, SimulationReport};
use libc::{c_char, size_t};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Parse = 4,
    Crypto = 5,
    Simulation = 6,
    Panic = 99,
}

/// Selects overhead rows. `All` prints every protocol.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CtOverheadProtocol {
    Msg1 = 0,
    Msg2 = 1,
    Set = 2,
    All = 3,
}

/// Homomorphic key pair with its own deterministic randomness.
pub struct CtAheKeyPair {
    pk: AhePublicKey,
    sk: AheSecretKey,
    rng: ChaCha20Rng,
}

/// Completed simulation. Text views stay valid until the handle is freed.
pub struct CtReport {
    report: SimulationReport,
    text: CString,
    probes_csv: CString,
}

/// Key id prefix on every framed ciphertext.
const FRAME_HEADER_LEN: usize = 4;

struct Failure(CtStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            CtStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CtStatus::NullPointer, format!("{what} is null"))
}

fn crypto(e: impl std::fmt::Display) -> Failure {
    Failure(CtStatus::Crypto, e.to_string())
}

unsafe fn input<'a>(data: *const u8, len: size_t, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn emit(bytes: &[u8], out: *mut u8, out_cap: size_t, out_len: *mut size_t) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = bytes.len();
    if bytes.len() > out_cap {
        return Err(Failure(
            CtStatus::BufferTooSmall,
            format!("need {} bytes, have {out_cap}", bytes.len()),
        ));
    }
    if !bytes.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
    }
    Ok(())
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Writes `out_cap` bytes of the counter-mode PRG for `(seed, counter)`.
#[no_mangle]
pub unsafe extern "C" fn ct_ctr_prg(seed16: *const u8, counter: u64, out: *mut u8, out_cap: size_t) -> CtStatus {
    guard(|| {
        let seed: [u8; 16] = input(seed16, 16, "seed16")?.try_into().expect("16 bytes");
        let bits = ctr_prg(&Seed::from_bytes(seed), counter, out_cap * 8).map_err(crypto)?;
        let mut written = 0;
        emit(bits.as_bytes(), out, out_cap, &mut written)
    })
}

/// Generates a key pair; `rng_seed` drives keygen and every later
/// randomized operation on the handle.
#[no_mangle]
pub unsafe extern "C" fn ct_ahe_keygen(modulus_bits: u32, rng_seed: u64, out: *mut *mut CtAheKeyPair) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
        let (pk, sk) = ahe_keygen(modulus_bits as usize, &mut rng)
            .map_err(|e| Failure(CtStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(CtAheKeyPair { pk, sk, rng }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_ahe_keypair_free(keys: *mut CtAheKeyPair) {
    if !keys.is_null() {
        drop(Box::from_raw(keys));
    }
}

/// Length in bytes of every framed ciphertext under this key.
#[no_mangle]
pub unsafe extern "C" fn ct_ahe_ciphertext_len(keys: *const CtAheKeyPair, out_len: *mut size_t) -> CtStatus {
    guard(|| {
        let keys = keys.as_ref().ok_or_else(|| null("keys"))?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        *out_len = FRAME_HEADER_LEN + keys.pk.ciphertext_len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_ahe_encrypt(
    keys: *mut CtAheKeyPair,
    value: u64,
    out: *mut u8,
    out_cap: size_t,
    out_len: *mut size_t,
) -> CtStatus {
    guard(|| {
        let keys = handle(keys, "keys")?;
        let c = keys.pk.encrypt_u64(value, &mut keys.rng).map_err(crypto)?;
        emit(&c.encode(&keys.pk), out, out_cap, out_len)
    })
}

/// `enc(r * (m0 - m1))` for fresh nonzero `r`.
#[no_mangle]
pub unsafe extern "C" fn ct_ahe_blinded_difference(
    keys: *mut CtAheKeyPair,
    c0: *const u8,
    c0_len: size_t,
    c1: *const u8,
    c1_len: size_t,
    out: *mut u8,
    out_cap: size_t,
    out_len: *mut size_t,
) -> CtStatus {
    guard(|| {
        let keys = handle(keys, "keys")?;
        let a = keys.pk.decode_ciphertext(input(c0, c0_len, "c0")?).map_err(crypto)?;
        let b = keys.pk.decode_ciphertext(input(c1, c1_len, "c1")?).map_err(crypto)?;
        let d = keys.pk.blinded_difference(&a, &b, &mut keys.rng).map_err(crypto)?;
        emit(&d.encode(&keys.pk), out, out_cap, out_len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_ahe_add(
    keys: *mut CtAheKeyPair,
    c0: *const u8,
    c0_len: size_t,
    c1: *const u8,
    c1_len: size_t,
    out: *mut u8,
    out_cap: size_t,
    out_len: *mut size_t,
) -> CtStatus {
    guard(|| {
        let keys = handle(keys, "keys")?;
        let a = keys.pk.decode_ciphertext(input(c0, c0_len, "c0")?).map_err(crypto)?;
        let b = keys.pk.decode_ciphertext(input(c1, c1_len, "c1")?).map_err(crypto)?;
        let sum = keys.pk.add(&a, &b).map_err(crypto)?;
        emit(&sum.encode(&keys.pk), out, out_cap, out_len)
    })
}

/// Sets `*is_zero` to 1 when the ciphertext decrypts to 0, else 0.
#[no_mangle]
pub unsafe extern "C" fn ct_ahe_decrypt_is_zero(
    keys: *const CtAheKeyPair,
    c: *const u8,
    c_len: size_t,
    is_zero: *mut u8,
) -> CtStatus {
    guard(|| {
        let keys = keys.as_ref().ok_or_else(|| null("keys"))?;
        if is_zero.is_null() {
            return Err(null("is_zero"));
        }
        let ct = keys.pk.decode_ciphertext(input(c, c_len, "c")?).map_err(crypto)?;
        *is_zero = u8::from(keys.sk.decrypt_is_zero(&ct).map_err(crypto)?);
        Ok(())
    })
}

/// Decrypts a plaintext that fits in 64 bits.
#[no_mangle]
pub unsafe extern "C" fn ct_ahe_decrypt_u64(
    keys: *const CtAheKeyPair,
    c: *const u8,
    c_len: size_t,
    value: *mut u64,
) -> CtStatus {
    guard(|| {
        let keys = keys.as_ref().ok_or_else(|| null("keys"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        let ct = keys.pk.decode_ciphertext(input(c, c_len, "c")?).map_err(crypto)?;
        let m = keys.sk.decrypt(&ct).map_err(crypto)?;
        *value = u64::try_from(m).map_err(|_| Failure(CtStatus::InvalidArgument, "plaintext exceeds 64 bits".into()))?;
        Ok(())
    })
}

/// Tab-separated overhead table for the given scale and default parameters.
#[no_mangle]
pub unsafe extern "C" fn ct_overhead_text(
    protocol: CtOverheadProtocol,
    users: u64,
    encounters_per_day: u64,
    infections_per_day: u64,
    out: *mut u8,
    out_cap: size_t,
    out_len: *mut size_t,
) -> CtStatus {
    guard(|| {
        if users == 0 {
            return Err(Failure(CtStatus::InvalidArgument, "users must be positive".into()));
        }
        let protocols = match protocol {
            CtOverheadProtocol::Msg1 => vec![OverheadProtocol::Msg1],
            CtOverheadProtocol::Msg2 => vec![OverheadProtocol::Msg2],
            CtOverheadProtocol::Set => vec![OverheadProtocol::Set],
            CtOverheadProtocol::All => OverheadProtocol::ALL.to_vec(),
        };
        let scale = Scale { users, encounters_per_day, infections_per_day };
        let text = compute_overhead(&Params::default(), scale, &protocols).to_text();
        emit(text.as_bytes(), out, out_cap, out_len)
    })
}

/// Parses `key = value` scenario text and runs it to completion.
#[no_mangle]
pub unsafe extern "C" fn ct_simulate(scenario: *const u8, scenario_len: size_t, out: *mut *mut CtReport) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = std::str::from_utf8(input(scenario, scenario_len, "scenario")?)
            .map_err(|e| Failure(CtStatus::Parse, e.to_string()))?;
        let scenario = Scenario::parse(text).map_err(|e| Failure(CtStatus::Parse, e.to_string()))?;
        let report = run_scenario(&scenario).map_err(|e| Failure(CtStatus::Simulation, e.to_string()))?;
        let text = CString::new(report.to_text()).expect("report has no NUL");
        let probes_csv = CString::new(report.probes_csv()).expect("csv has no NUL");
        *out = Box::into_raw(Box::new(CtReport { report, text, probes_csv }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ct_report_free(report: *mut CtReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// NUL-terminated report text owned by the handle; null for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ct_report_text(report: *const CtReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.text.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn ct_report_probes_csv(report: *const CtReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.probes_csv.as_ptr())
}

/// 1 when every probe contract holds, 0 otherwise or for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ct_report_contracts_hold(report: *const CtReport) -> u8 {
    report
        .as_ref()
        .map_or(0, |r| u8::from(r.report.contract_violations().is_empty()))
}

#[no_mangle]
pub unsafe extern "C" fn ct_report_detection(
    report: *const CtReport,
    precision: *mut f64,
    recall: *mut f64,
) -> CtStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if precision.is_null() || recall.is_null() {
            return Err(null("precision or recall"));
        }
        *precision = r.report.detection.precision;
        *recall = r.report.detection.recall;
        Ok(())
    })
}
