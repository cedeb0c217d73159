use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{CryptoRng, Rng, RngCore};

use crate::crypto::{ahe_keygen, CryptoError};

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct OpTiming {
    pub count: usize,
    pub elapsed: Duration,
}

impl OpTiming {
    /// `None` when nothing ran.
    pub fn ops_per_sec(&self) -> Option<f64> {
        let secs = self.elapsed.as_secs_f64();
        (self.count > 0 && secs > 0.0).then(|| self.count as f64 / secs)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct BenchReport {
    pub key_bits: usize,
    pub keygen: Duration,
    pub encryptions: OpTiming,
    pub blinded_differences: OpTiming,
    pub decryptions: OpTiming,
    /// Zero decryptions among the blinded differences; every third pair is equal.
    pub zero_results: usize,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "key_bits = {}", self.key_bits);
        let _ = writeln!(s, "keygen_secs = {:.6}", self.keygen.as_secs_f64());
        for (name, t) in [
            ("encrypt", self.encryptions),
            ("blinded_difference", self.blinded_differences),
            ("decrypt", self.decryptions),
        ] {
            let _ = writeln!(s, "{name}.count = {}", t.count);
            let _ = writeln!(s, "{name}.wall_secs = {:.6}", t.elapsed.as_secs_f64());
            match t.ops_per_sec() {
                Some(r) => {
                    let _ = writeln!(s, "{name}.ops_per_sec = {r:.1}");
                }
                None => {
                    let _ = writeln!(s, "{name}.ops_per_sec = n/a");
                }
            }
        }
        let _ = writeln!(s, "zero_results = {}", self.zero_results);
        s
    }
}

/// Times keygen, then `count` each of share encryptions, blinded differences
/// against a fresh indicator encryption, and decryptions.
pub fn bench_ahe<R: RngCore + CryptoRng>(key_bits: usize, count: usize, rng: &mut R) -> Result<BenchReport, CryptoError> {
    let start = Instant::now();
    let (pk, sk) = ahe_keygen(key_bits, rng)?;
    let keygen = start.elapsed();

    let shares: Vec<u64> = (0..count).map(|_| rng.gen_range(0..16)).collect();
    let start = Instant::now();
    let mut encrypted = Vec::with_capacity(count);
    for s in &shares {
        encrypted.push(pk.encrypt_u64(*s, rng)?);
    }
    let encryptions = OpTiming { count, elapsed: start.elapsed() };

    let indicators: Vec<u64> = shares
        .iter()
        .enumerate()
        .map(|(i, s)| if i % 3 == 0 { *s } else { (*s + 1) % 16 })
        .collect();
    let indicator_cts = indicators
        .iter()
        .map(|v| pk.encrypt_u64(*v, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let start = Instant::now();
    let mut diffs = Vec::with_capacity(count);
    for (c, i) in encrypted.iter().zip(&indicator_cts) {
        diffs.push(pk.blinded_difference(c, i, rng)?);
    }
    let blinded_differences = OpTiming { count, elapsed: start.elapsed() };

    let start = Instant::now();
    let mut zero_results = 0;
    for d in &diffs {
        if sk.decrypt_is_zero(d)? {
            zero_results += 1;
        }
    }
    let decryptions = OpTiming { count, elapsed: start.elapsed() };

    Ok(BenchReport { key_bits, keygen, encryptions, blinded_differences, decryptions, zero_results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn counts_are_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let r = bench_ahe(512, 9, &mut rng).unwrap();
        assert_eq!(r.encryptions.count, 9);
        assert_eq!(r.decryptions.count, 9);
        assert_eq!(r.zero_results, 3);
    }

    #[test]
    fn zero_count_reports_no_rate() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let r = bench_ahe(512, 0, &mut rng).unwrap();
        assert_eq!(r.encryptions.ops_per_sec(), None);
        assert!(r.to_text().contains("encrypt.count = 0"));
    }

    #[test]
    fn unsupported_size_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert!(bench_ahe(1000, 1, &mut rng).is_err());
    }
}
