//! Goodness-of-fit statistics used by the traffic probes.

/// One-sample Kolmogorov-Smirnov result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `samples` against Exp with the given mean. The p-value uses
/// the asymptotic Kolmogorov distribution with Stephens' small-sample
/// correction.
pub fn ks_exponential(samples: &[f64], mean: f64) -> KsResult {
    let n = samples.len();
    if n == 0 || mean.is_nan() || mean <= 0.0 {
        return KsResult { n, statistic: 0.0, p_value: 1.0 };
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-x.max(0.0) / mean).exp();
        let lo = i as f64 / nf;
        let hi = (i + 1) as f64 / nf;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult { n, statistic: d, p_value: kolmogorov_survival(lambda) }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-squared statistic for observed counts against a uniform
/// expectation.
pub fn chi_squared_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Exp, Uniform};

    #[test]
    fn survival_reference_points() {
        // Standard critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn accepts_exponential_rejects_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let exp = Exp::new(1.0 / 30.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
        assert!(ks_exponential(&xs, 30.0).p_value > 0.01);
        let uni = Uniform::new(0.0, 60.0);
        let ys: Vec<f64> = (0..10_000).map(|_| uni.sample(&mut rng)).collect();
        assert!(ks_exponential(&ys, 30.0).p_value < 1e-6);
        assert!(ks_exponential(&xs, 40.0).p_value < 1e-6);
    }

    #[test]
    fn chi_squared_basics() {
        assert_eq!(chi_squared_uniform(&[10, 10, 10]), 0.0);
        assert!((chi_squared_uniform(&[20, 0]) - 20.0).abs() < 1e-12);
    }
}
