//! Statistical plumbing: compensated sums, two-sample Kolmogorov-Smirnov,
//! Wilson and Clopper-Pearson binomial intervals.
//!
//! Everything here is a pure function of its inputs so that harness reports
//! are bit-reproducible across runs and thread counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Normal quantile for two-sided 99% coverage.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Kahan-compensated accumulator. Chunk partials are merged in fixed index
/// order, so totals do not depend on the worker count.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn merge(&mut self, other: KahanSum) {
        self.add(other.sum);
        self.add(-other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn kahan_total(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    kahan_total(xs) / xs.len() as f64
}

/// (mean, unbiased variance); two passes, compensated.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        let d = x - m;
        acc.add(d * d);
    }
    (m, acc.value() / (xs.len().saturating_sub(1)).max(1) as f64)
}

/// k-th central sample moment.
pub fn central_moment(xs: &[f64], k: u32) -> f64 {
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - m).powi(k as i32));
    }
    acc.value() / xs.len() as f64
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Asymptotic two-sample KS threshold at level `alpha`.
pub fn ks_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov test. Sup of |F_a - F_b| over the pooled
/// sample, ties consumed on both sides before comparing.
pub fn two_sample_ks(a: &[f64], b: &[f64], alpha: f64) -> Result<KsOutcome, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        if gap > d {
            d = gap;
        }
    }
    let threshold = ks_threshold(n, m, alpha);
    Ok(KsOutcome { statistic: d, threshold, alpha, pass: d <= threshold })
}

/// Wilson score interval for k successes out of n at the given z.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "wilson interval of empty sample");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// ln Γ(x), Lanczos g=7 n=9.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (std::f64::consts::TAU).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_IT: usize = 300;
    const EPS: f64 = 3.0e-16;
    const FPMIN: f64 = 1.0e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_IT {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a,b).
pub fn reg_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Inverse of I_x(a,b) in x, by bisection (monotone CDF).
pub fn reg_incomplete_beta_inv(a: f64, b: f64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reg_incomplete_beta(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper-Pearson lower confidence bound for k successes of n.
pub fn clopper_pearson_lower(successes: u64, n: u64, confidence: f64) -> Result<f64, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..1.0).contains(&(1.0 - confidence)) {
        return Err(StatsError::InvalidParameter("confidence must lie in (0,1)"));
    }
    if successes == 0 {
        return Ok(0.0);
    }
    let alpha = 1.0 - confidence;
    let k = successes as f64;
    Ok(reg_incomplete_beta_inv(k, n as f64 - k + 1.0, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SamplerStream;

    #[test]
    fn ks_identical_samples_pass() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let out = two_sample_ks(&xs, &xs, 0.01).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert!(out.pass);
    }

    #[test]
    fn ks_single_equal_points() {
        let out = two_sample_ks(&[1.5], &[1.5], 0.05).unwrap();
        assert_eq!(out.statistic, 0.0);
    }

    #[test]
    fn ks_disjoint_uniforms_reject() {
        // Uniform[0,1] vs Uniform[0.5,1.5]: sup CDF gap 0.5.
        let s = SamplerStream::new(7, 0);
        let n = 10_000u64;
        let a: Vec<f64> = (0..n).map(|i| s.rng_at(i).uniform01()).collect();
        let b: Vec<f64> = (0..n).map(|i| s.child(1).rng_at(i).uniform01() + 0.5).collect();
        let out = two_sample_ks(&a, &b, 0.01).unwrap();
        assert!((out.statistic - 0.5).abs() < 0.03, "statistic {}", out.statistic);
        assert!(!out.pass);
    }

    #[test]
    fn ks_empty_errors() {
        assert_eq!(two_sample_ks(&[], &[1.0], 0.05).unwrap_err(), StatsError::EmptySample);
    }

    #[test]
    fn incomplete_beta_matches_binomial_oracle() {
        // integer cases via binomial-sum identity, frozen offline
        assert!((reg_incomplete_beta(2.0, 3.0, 0.3) - 0.3483).abs() < 1e-12);
        assert!((reg_incomplete_beta(5.0, 2.0, 0.75) - 0.533935546875).abs() < 1e-12);
        assert!((reg_incomplete_beta(4.0, 7.0, 0.9) - 0.9999908784).abs() < 1e-12);
        // arcsine case: I_x(1/2,1/2) = (2/pi) asin(sqrt x)
        assert!((reg_incomplete_beta(0.5, 0.5, 0.25) - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn clopper_pearson_matches_oracle() {
        let l = clopper_pearson_lower(3, 10, 0.99).unwrap();
        assert!((l - 0.04750699895116127).abs() < 1e-9, "{l}");
        let l = clopper_pearson_lower(9950, 10_000, 0.995).unwrap();
        assert!((l - 0.9928809727238175).abs() < 1e-9, "{l}");
        // k = n closed form (1-conf)^(1/n)
        let l = clopper_pearson_lower(20, 20, 0.99).unwrap();
        assert!((l - 0.7943282347242815).abs() < 1e-9, "{l}");
        assert_eq!(clopper_pearson_lower(0, 50, 0.99).unwrap(), 0.0);
    }

    #[test]
    fn wilson_matches_oracle() {
        let (lo, hi) = wilson_interval(625, 10_000, Z_99);
        assert!((lo - 0.056550315096241956).abs() < 1e-12);
        assert!((hi - 0.06902985342053541).abs() < 1e-12);
    }

    #[test]
    fn kahan_merge_order_independent() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 2654435761u64 % 1000) as f64).sin() * 1e10 + 1e-10).collect();
        let total = kahan_total(&xs);
        let mut parts = Vec::new();
        for chunk in xs.chunks(97) {
            let mut k = KahanSum::new();
            for &x in chunk {
                k.add(x);
            }
            parts.push(k);
        }
        let mut merged = KahanSum::new();
        for p in parts {
            merged.merge(p);
        }
        assert!((merged.value() - total).abs() <= 1e-6 * total.abs().max(1.0));
    }
}
