//! Moments and distribution-free tests used to turn Monte Carlo output into
//! verdicts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn accepts(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // series converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sq = effective_n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample Kolmogorov–Smirnov test (asymptotic p-value with Stephens'
/// small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("KS test needs two nonempty samples"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, ne),
    })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if a.is_empty() {
        return Err(Error::EmptyInput("KS test needs a nonempty sample"));
    }
    let mut x = a.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Pearson chi-square goodness of fit of integer counts to probabilities.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<TestResult> {
    if observed.len() != expected_probs.len() || observed.len() < 2 {
        return Err(Error::EmptyInput("chi-square needs matching bins (at least two)"));
    }
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let chi = ChiSquared::new(df).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: stat,
        p_value: chi.sf(stat),
    })
}

/// Anderson–Darling normality test with mean and variance estimated from the
/// sample. `statistic` is the small-sample adjusted `A*² = A²(1 + 0.75/n + 2.25/n²)`;
/// the p-value uses D'Agostino and Stephens' piecewise approximation.
pub fn anderson_darling_normal(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < 8 {
        return Err(Error::EmptyInput("Anderson-Darling needs at least 8 samples"));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::EmptyInput("Anderson-Darling needs a non-degenerate sample"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| {
            let f_lo = normal.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
            let f_hi = normal.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
            (2 * i + 1) as f64 * (f_lo.ln() + (1.0 - f_hi).ln())
        })
        .sum();
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(TestResult {
        statistic: a,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// Per-test level for `m` simultaneous tests at family level `alpha`.
pub fn bonferroni(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::RandomStream;

    #[test]
    fn moments_and_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_sf_reference_points() {
        // P(K > 1.358) ≈ 0.05 and P(K > 1.628) ≈ 0.01 are the classical critical values
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_two_sample_same_and_shifted() {
        let mut s = RandomStream::new(1, 0);
        let a: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let b: Vec<f64> = (0..2000).map(|_| s.uniform()).collect();
        let c: Vec<f64> = (0..2000).map(|_| s.uniform() + 0.1).collect();
        assert!(ks_two_sample(&a, &b).unwrap().accepts(0.01));
        assert!(!ks_two_sample(&a, &c).unwrap().accepts(0.01));
        let d = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d.statistic, 0.0);
    }

    #[test]
    fn ks_two_sample_handles_ties() {
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_one_sample_uniform() {
        let mut s = RandomStream::new(2, 0);
        let a: Vec<f64> = (0..5000).map(|_| s.uniform()).collect();
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap().accepts(0.01));
        assert!(!ks_one_sample(&a, |x| (x * x).clamp(0.0, 1.0)).unwrap().accepts(0.01));
    }

    #[test]
    fn chi_square_detects_bias() {
        let fair = chi_square_gof(&[5020, 4980], &[0.5, 0.5]).unwrap();
        assert!(fair.accepts(0.01));
        let biased = chi_square_gof(&[5400, 4600], &[0.5, 0.5]).unwrap();
        assert!(!biased.accepts(0.01));
    }

    #[test]
    fn anderson_darling_normal_vs_exponential() {
        let mut s = RandomStream::new(3, 0);
        let g: Vec<f64> = (0..2000).map(|_| s.standard_normal()).collect();
        let e: Vec<f64> = (0..2000).map(|_| s.exponential()).collect();
        assert!(anderson_darling_normal(&g).unwrap().accepts(0.01));
        assert!(!anderson_darling_normal(&e).unwrap().accepts(0.01));
    }
}
