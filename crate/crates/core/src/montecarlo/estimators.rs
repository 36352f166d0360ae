//! Estimators shared by the experiments.

use std::collections::BTreeMap;

use crate::asymptotics::Interval;
use crate::error::{Error, Result};

/// One-sample Kolmogorov–Smirnov distance between `sample` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("ks_statistic sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0_f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / m - f;
        let below = f - i as f64 / m;
        acc.max(above.abs()).max(below.abs())
    });
    Ok(d.min(1.0))
}

/// Relative frequencies of the values in `samples`.
pub fn empirical_pmf(samples: &[u64]) -> BTreeMap<u64, f64> {
    let mut counts = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    let total = samples.len() as f64;
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total))
        .collect()
}

/// Half the L¹ distance between two pmfs over the union of their supports.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Fraction of `intervals` containing `truth`.
pub fn coverage_estimate(intervals: &[Interval<f64>], truth: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Empty("coverage_estimate intervals"));
    }
    let hits = intervals.iter().filter(|iv| iv.contains(truth)).count();
    Ok(hits as f64 / intervals.len() as f64)
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = sample_variance_about(xs, mean);
    (mean, (var / n).sqrt())
}

fn sample_variance_about(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Unbiased sample variance and a standard error for it, from the fourth
/// central moment: se² ≈ (μ₄ − σ⁴(n−3)/(n−1)) / n.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = sample_variance_about(xs, mean);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se2 = (m4 - var * var * (n - 3.0) / (n - 1.0)) / n;
    (var, se2.max(0.0).sqrt())
}

/// Sample covariance of columns `i` and `j` of `rows` with a standard error
/// from the spread of the centered products.
pub fn covariance_se<const D: usize>(rows: &[[f64; D]], i: usize, j: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mi = rows.iter().map(|r| r[i]).sum::<f64>() / n;
    let mj = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let products: Vec<f64> = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).collect();
    let cov = products.iter().sum::<f64>() / (n - 1.0);
    let (_, se) = mean_se(&products);
    (cov, se)
}

/// Standard error of a proportion estimate.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
