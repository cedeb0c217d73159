use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use contact_trace_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ct_last_error()) }.to_string_lossy().into_owned()
}

struct Keys(*mut CtAheKeyPair);

impl Keys {
    fn new(bits: u32, seed: u64) -> Self {
        let mut k = ptr::null_mut();
        assert_eq!(unsafe { ct_ahe_keygen(bits, seed, &mut k) }, CtStatus::Ok);
        Keys(k)
    }

    fn encrypt(&self, m: u64) -> Vec<u8> {
        let mut len = 0;
        unsafe {
            assert_eq!(ct_ahe_ciphertext_len(self.0, &mut len), CtStatus::Ok);
            let mut buf = vec![0u8; len];
            assert_eq!(ct_ahe_encrypt(self.0, m, buf.as_mut_ptr(), buf.len(), &mut len), CtStatus::Ok);
            buf.truncate(len);
            buf
        }
    }
}

impl Drop for Keys {
    fn drop(&mut self) {
        unsafe { ct_ahe_keypair_free(self.0) }
    }
}

#[test]
fn prg_is_deterministic_and_checks_pointers() {
    let seed = [7u8; 16];
    let (mut a, mut b) = ([0u8; 32], [0u8; 32]);
    unsafe {
        assert_eq!(ct_ctr_prg(seed.as_ptr(), 3, a.as_mut_ptr(), a.len()), CtStatus::Ok);
        assert_eq!(ct_ctr_prg(seed.as_ptr(), 3, b.as_mut_ptr(), b.len()), CtStatus::Ok);
        assert_eq!(a, b);
        assert_eq!(ct_ctr_prg(seed.as_ptr(), 4, b.as_mut_ptr(), b.len()), CtStatus::Ok);
        assert_ne!(a, b);
        assert_eq!(ct_ctr_prg(ptr::null(), 3, a.as_mut_ptr(), a.len()), CtStatus::NullPointer);
    }
    assert!(last_error().contains("seed16"));
}

#[test]
fn equality_gadget_through_the_abi() {
    let keys = Keys::new(512, 11);
    let (c5, c5b, c6) = (keys.encrypt(5), keys.encrypt(5), keys.encrypt(6));
    let mut out = vec![0u8; c5.len()];
    let mut len = 0;
    let mut zero = 9u8;
    unsafe {
        for (other, expect_zero) in [(&c5b, 1u8), (&c6, 0u8)] {
            let s = ct_ahe_blinded_difference(
                keys.0, c5.as_ptr(), c5.len(), other.as_ptr(), other.len(), out.as_mut_ptr(), out.len(), &mut len,
            );
            assert_eq!(s, CtStatus::Ok);
            assert_eq!(ct_ahe_decrypt_is_zero(keys.0, out.as_ptr(), len, &mut zero), CtStatus::Ok);
            assert_eq!(zero, expect_zero);
        }
        assert_eq!(
            ct_ahe_add(keys.0, c5.as_ptr(), c5.len(), c6.as_ptr(), c6.len(), out.as_mut_ptr(), out.len(), &mut len),
            CtStatus::Ok
        );
        let mut value = 0u64;
        assert_eq!(ct_ahe_decrypt_u64(keys.0, out.as_ptr(), len, &mut value), CtStatus::Ok);
        assert_eq!(value, 11);
    }
}

#[test]
fn foreign_ciphertext_is_a_crypto_error() {
    let (a, b) = (Keys::new(512, 1), Keys::new(512, 2));
    let c = b.encrypt(1);
    let mut zero = 0u8;
    assert_eq!(unsafe { ct_ahe_decrypt_is_zero(a.0, c.as_ptr(), c.len(), &mut zero) }, CtStatus::Crypto);
    assert!(!last_error().is_empty());
}

#[test]
fn unsupported_key_size_is_invalid() {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { ct_ahe_keygen(1000, 0, &mut k) }, CtStatus::InvalidArgument);
    assert!(k.is_null());
}

#[test]
fn small_buffer_reports_required_length() {
    let mut len = 0;
    let mut tiny = [0u8; 4];
    let s = unsafe {
        ct_overhead_text(CtOverheadProtocol::Set, 10_000_000, 100, 50_000, tiny.as_mut_ptr(), tiny.len(), &mut len)
    };
    assert_eq!(s, CtStatus::BufferTooSmall);
    let mut buf = vec![0u8; len];
    let s = unsafe {
        ct_overhead_text(CtOverheadProtocol::Set, 10_000_000, 100, 50_000, buf.as_mut_ptr(), buf.len(), &mut len)
    };
    assert_eq!(s, CtStatus::Ok);
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("716800 B"), "{text}");
}

#[test]
fn simulate_round_trip_and_parse_errors() {
    let text = b"population = 20\ndays = 2\nencounters_per_user_day = 5\n";
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(ct_simulate(text.as_ptr(), text.len(), &mut report), CtStatus::Ok);
        assert_eq!(ct_report_contracts_hold(report), 1);
        let (mut p, mut r) = (0.0, 0.0);
        assert_eq!(ct_report_detection(report, &mut p, &mut r), CtStatus::Ok);
        assert_eq!((p, r), (1.0, 1.0));
        let body = CStr::from_ptr(ct_report_text(report)).to_str().unwrap();
        assert!(body.contains("population = 20"));
        assert!(CStr::from_ptr(ct_report_probes_csv(report)).to_str().unwrap().starts_with("probe,metric,value"));
        ct_report_free(report);

        let bad = b"population = 20\nnonsense\n";
        let mut report = ptr::null_mut();
        assert_eq!(ct_simulate(bad.as_ptr(), bad.len(), &mut report), CtStatus::Parse);
        assert!(report.is_null());
        assert!(last_error().contains("line 2"));
        assert!(ct_report_text(ptr::null()).is_null());
        ct_report_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_exports_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/contact_trace.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in ["ct_last_error", "ct_ahe_keygen", "ct_simulate", "ct_report_free", "CT_STATUS_BUFFER_TOO_SMALL"] {
        assert!(text.contains(symbol), "{symbol}");
    }
    let probe = std::env::temp_dir().join("contact_trace_header_probe.c");
    std::fs::write(&probe, "#include \"contact_trace.h\"\nint main(void) { return ct_last_error() == 0; }\n").unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&probe)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile as C99"),
        Err(e) => eprintln!("skipping C compile check: {e}"),
    }
}
