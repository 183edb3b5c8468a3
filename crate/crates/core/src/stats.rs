//! Small statistics toolkit: moments, batch means, Kolmogorov–Smirnov tests.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Sample mean and unbiased sample variance (variance 0 for one sample).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Mean and its standard error, treating samples as independent.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, (v / xs.len() as f64).sqrt())
}

/// Mean with a batch-means standard error for a correlated series.
///
/// The series is cut into `n_batches` contiguous blocks of equal length
/// (a remainder at the front is discarded); the SE is that of the block means.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Result<(f64, f64)> {
    let nb = n_batches.max(2);
    if xs.len() < nb {
        return Err(Error::TooFewSamples {
            got: xs.len(),
            need: nb,
        });
    }
    let len = xs.len() / nb;
    let skip = xs.len() - len * nb;
    let means: Vec<f64> = xs[skip..]
        .chunks_exact(len)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    Ok(mean_se(&means))
}

/// Default batch count: about `√n`, clamped to `[2, 50]`.
pub fn default_batches(n: usize) -> usize {
    ((n as f64).sqrt() as usize).clamp(2, 50)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov survival function `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic against a continuous CDF. Sorts `xs` in place.
pub fn ks_statistic_vs(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// p-value for a KS statistic `d` at effective sample size `n`, with
/// Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut v = xs.to_vec();
    let d = ks_statistic_vs(&mut v, cdf);
    KsResult {
        statistic: d,
        p_value: ks_pvalue(d, xs.len() as f64),
        n: xs.len(),
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    KsResult {
        statistic: d,
        p_value: ks_pvalue(d, ne),
        n: a.len() + b.len(),
    }
}

/// `x` is larger than `y` at `k` combined standard errors.
pub fn greater_at(x: (f64, f64), y: (f64, f64), k: f64) -> bool {
    x.0 - y.0 > k * x.1.hypot(y.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn moments() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_var(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn batch_means_of_iid_matches_naive_se() {
        let mut rng = crate::rng::rng_from_seed(1);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let (m, se) = batch_means(&xs, 40).unwrap();
        let (m0, se0) = mean_se(&xs);
        assert!((m - m0).abs() < 1e-12);
        assert!((se / se0 - 1.0).abs() < 0.4);
        assert!(batch_means(&xs[..3], 10).is_err());
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        let q = normal_cdf(1.959963984540054);
        assert!((q - 0.975).abs() < 1e-10, "{q}");
        let p = normal_cdf(-1.0);
        assert!((p - 0.15865525393145707).abs() < 1e-10, "{p}");
    }

    #[test]
    fn kolmogorov_reference_points() {
        // classical critical values
        assert!((kolmogorov_sf(1.3580986393225505) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_sf(1.9494) - 0.001).abs() < 1e-5);
    }

    #[test]
    fn ks_detects_and_accepts() {
        let mut rng = crate::rng::rng_from_seed(3);
        let u: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let ok = ks_one_sample(&u, |x| x.clamp(0.0, 1.0));
        assert!(ok.p_value > 1e-3, "{ok:?}");
        let bad = ks_one_sample(&u, |x| (x * x).clamp(0.0, 1.0));
        assert!(bad.p_value < 1e-6);

        let v: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&u, &v).p_value > 1e-3);
        let w: Vec<f64> = v.iter().map(|x| x + 0.1).collect();
        assert!(ks_two_sample(&u, &w).p_value < 1e-6);
    }

    #[test]
    fn two_sample_statistic_small_example() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5]);
        // F_a - F_b peaks at x in [2, 2.5): 2/3 - 0
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-15);
        let tie = ks_two_sample(&[1.0, 1.0], &[1.0]);
        assert_eq!(tie.statistic, 0.0);
    }
}
