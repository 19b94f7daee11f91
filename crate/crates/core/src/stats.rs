//! Replicate statistics: moments, jackknife errors and Kolmogorov–Smirnov
//! distances.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::special::normal_cdf;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor `R - 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Moment summary of a replicate sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let r = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= r;
    m3 /= r;
    m4 /= r;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        mean: m,
        variance: m2 * r / (r - 1.0),
        variance_se: jackknife_variance_se(xs),
        skewness,
        excess_kurtosis,
    }
}

/// Jackknife standard error of the unbiased sample variance.
///
/// Leave-one-out variances are obtained in O(1) each from running sums.
pub fn jackknife_variance_se(xs: &[f64]) -> f64 {
    let r = xs.len();
    if r < 3 {
        return f64::NAN;
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let s1: f64 = centered.iter().sum();
    let s2: f64 = centered.iter().map(|d| d * d).sum();
    let k = (r - 1) as f64;
    let loo: Vec<f64> = centered
        .iter()
        .map(|&d| {
            let t1 = s1 - d;
            let t2 = s2 - d * d;
            (t2 - t1 * t1 / k) / (k - 1.0)
        })
        .collect();
    let lm = mean(&loo);
    let ss: f64 = loo.iter().map(|v| (v - lm) * (v - lm)).sum();
    (ss * k / r as f64).sqrt()
}

/// Supremum distance between the empirical CDF of `sorted` and a limit
/// CDF that may have jumps. `cdf_left(x)` must return `F(x-)`.
pub fn ks_distance(
    sorted: &[f64],
    cdf: impl Fn(f64) -> f64,
    cdf_left: impl Fn(f64) -> f64,
) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = (j + 1) as f64 / n;
        d = d.max((below - cdf_left(x)).abs()).max((at - cdf(x)).abs());
        i = j + 1;
    }
    d
}

/// Kolmogorov–Smirnov statistic of `xs` against the standard normal.
pub fn ks_standard_normal(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_distance(&sorted, normal_cdf, normal_cdf)
}

/// Asymptotic p-value of a one-sample KS statistic `d` for sample size
/// `n`, with Stephens' finite-size correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_survival(lambda)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form, fast for small x.
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        let w = (2.0 * core::f64::consts::PI).sqrt() / x;
        let cdf: f64 = (1..=6)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-(j * j) * pi2 / (8.0 * x * x)).exp()
            })
            .sum::<f64>()
            * w;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments_of_small_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let m = moments(&xs);
        assert_relative_eq!(m.mean, 2.5);
        assert_relative_eq!(m.variance, 5.0 / 3.0);
        assert_relative_eq!(m.skewness, 0.0, epsilon = 1e-15);
        assert_relative_eq!(m.excess_kurtosis, 1.64 - 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_sample_has_zero_variance() {
        let m = moments(&[3.0; 10]);
        assert_eq!(m.variance, 0.0);
        assert_eq!(m.variance_se, 0.0);
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let xs = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4, 0.9];
        let r = xs.len();
        let loo: Vec<f64> = (0..r)
            .map(|i| {
                let rest: Vec<f64> = xs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &x)| x)
                    .collect();
                sample_variance(&rest)
            })
            .collect();
        let lm = mean(&loo);
        let brute = (loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>() * (r - 1) as f64
            / r as f64)
            .sqrt();
        assert_relative_eq!(jackknife_variance_se(&xs), brute, max_relative = 1e-12);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Classical critical values of the limiting distribution.
        assert_relative_eq!(kolmogorov_survival(1.358_1), 0.05, epsilon = 2e-4);
        assert_relative_eq!(kolmogorov_survival(1.627_6), 0.01, epsilon = 1e-4);
        assert_relative_eq!(kolmogorov_survival(0.5), 0.963_945, epsilon = 1e-5);
        // the two series agree where they meet
        let a = kolmogorov_survival(1.18 - 1e-12);
        let b = kolmogorov_survival(1.18);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ks_distance_handles_atoms() {
        // Limit: half mass at 0, half uniform on [0, 1].
        let cdf = |x: f64| {
            if x < 0.0 {
                0.0
            } else {
                0.5 + 0.5 * x.min(1.0)
            }
        };
        let left = |x: f64| if x <= 0.0 { 0.0 } else { cdf(x) };
        let sample = vec![0.0, 0.0, 0.25, 0.75];
        let d = ks_distance(&sample, cdf, left);
        assert_relative_eq!(d, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn normal_sample_passes_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_standard_normal(&xs);
        assert!(ks_pvalue(d, xs.len()) > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.3).collect();
        let d = ks_standard_normal(&shifted);
        assert!(ks_pvalue(d, xs.len()) < 1e-6);
    }
}
