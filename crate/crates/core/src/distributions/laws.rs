//! Geometric and negative binomial laws on trial counts, and the multinomial
//! covariance of standardized hit counts.
//!
//! Both laws count trials: a geometric variable is the index of the first
//! success (support 1, 2, …) and a negative binomial variable with parameters
//! (k, p) is the index of the k-th success (support k, k+1, …).

use serde::{Deserialize, Serialize};

use super::special::ln_choose;
use crate::error::{domain, Result};
use crate::scalar::{count, lit, unit_sum_tolerance, Real};

fn check_open_unit<T: Real>(p: T, what: &str) -> Result<()> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        domain(format!("{what} must lie in (0, 1), got {p}"))
    }
}

/// P(Z = h) for Z geometric with success probability `p`.
pub fn geometric_pmf<T: Real>(p: T, h: u64) -> Result<T> {
    check_open_unit(p, "p")?;
    if h < 1 {
        return domain("geometric_pmf requires h >= 1");
    }
    Ok((T::one() - p).powi((h - 1) as i32) * p)
}

/// ln P(N = n) for N negative binomial (k-th success at trial n).
///
/// Returns `-inf` for n < k. Binomial coefficients are taken in log space so
/// k and n can run to 10⁵ and beyond without overflow.
pub fn nb_log_pmf<T: Real>(k: u64, p: T, n: u64) -> Result<T> {
    check_open_unit(p, "p")?;
    if k < 1 {
        return domain("negative binomial requires k >= 1");
    }
    if n < k {
        return Ok(T::neg_infinity());
    }
    let failures = count::<T>(n - k);
    Ok(ln_choose::<T>(n - 1, k - 1) + count::<T>(k) * p.ln() + failures * (-p).ln_1p())
}

/// P(N = n) = C(n−1, k−1) pᵏ (1−p)^{n−k} for n ≥ k, else 0.
pub fn nb_pmf<T: Real>(k: u64, p: T, n: u64) -> Result<T> {
    nb_log_pmf(k, p, n).map(T::exp)
}

/// P(N ≤ n), accumulated term by term from n = k.
pub fn nb_cdf<T: Real>(k: u64, p: T, n: u64) -> Result<T> {
    check_open_unit(p, "p")?;
    if k < 1 {
        return domain("negative binomial requires k >= 1");
    }
    let mut acc = T::zero();
    for m in k..=n {
        acc = acc + nb_pmf(k, p, m)?;
    }
    Ok(acc.min(T::one()))
}

/// Mean, variance and third central moment of a geometric trial count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricMoments<T> {
    pub p: T,
    /// Mean number of trials, 1/p.
    pub nu: T,
    /// Variance, (1−p)/p².
    pub sigma2: T,
    /// Third central moment, (1−p)(2−p)/p³.
    pub gamma: T,
}

impl<T: Real> GeometricMoments<T> {
    pub fn sigma(&self) -> T {
        self.sigma2.sqrt()
    }
}

pub fn geometric_moments<T: Real>(p: T) -> Result<GeometricMoments<T>> {
    check_open_unit(p, "p")?;
    let q = T::one() - p;
    Ok(GeometricMoments {
        p,
        nu: p.recip(),
        sigma2: q / (p * p),
        gamma: q * (lit::<T>(2.0) - p) / (p * p * p),
    })
}

/// Asymptotic covariance of the standardized multinomial hit counts:
/// σᵢᵢ = 1 − pᵢ and σᵢⱼ = −√(pᵢpⱼ).
pub fn multinomial_cov<T: Real>(p: [T; 3]) -> Result<[[T; 3]; 3]> {
    if p.iter().any(|&x| !(x > T::zero())) {
        return domain("multinomial_cov requires every p_i > 0");
    }
    let total = p[0] + p[1] + p[2];
    if (total - T::one()).abs() > unit_sum_tolerance::<T>(3) {
        return domain(format!("multinomial_cov requires sum p_i = 1, got {total}"));
    }
    let mut cov = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = if i == j {
                T::one() - p[i]
            } else {
                -(p[i] * p[j]).sqrt()
            };
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Probability of exactly `h` trials to first success, by enumerating all
    /// 0/1 outcome strings of length h.
    fn geometric_by_enumeration(p: f64, h: u32) -> f64 {
        (0u32..(1 << h))
            .filter(|bits| {
                // first success exactly at the last position
                (0..h - 1).all(|i| bits & (1 << i) == 0) && bits & (1 << (h - 1)) != 0
            })
            .map(|bits| {
                (0..h)
                    .map(|i| if bits & (1 << i) != 0 { p } else { 1.0 - p })
                    .product::<f64>()
            })
            .sum()
    }

    /// k-fold convolution of the geometric pmf on 1..=n_max.
    fn convolved_geometric(p: f64, k: usize, n_max: usize) -> Vec<f64> {
        let geo: Vec<f64> = (0..=n_max)
            .map(|h| {
                if h == 0 {
                    0.0
                } else {
                    (1.0 - p).powi(h as i32 - 1) * p
                }
            })
            .collect();
        let mut acc = geo.clone();
        for _ in 1..k {
            let mut next = vec![0.0; n_max + 1];
            for (a, &pa) in acc.iter().enumerate() {
                for (b, &pb) in geo.iter().enumerate() {
                    if a + b <= n_max {
                        next[a + b] += pa * pb;
                    }
                }
            }
            acc = next;
        }
        acc
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(geometric_pmf(0.5_f64, 1).unwrap(), 0.5);
        assert_eq!(geometric_pmf(0.5_f64, 3).unwrap(), 0.125);
        let oracle = geometric_by_enumeration(0.3, 4);
        assert!((oracle - 0.1029).abs() < 1e-12);
        assert!((geometric_pmf(0.3_f64, 4).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn geometric_domain_errors() {
        assert!(geometric_pmf(0.0_f64, 1).is_err());
        assert!(geometric_pmf(1.0_f64, 1).is_err());
        assert!(geometric_pmf(0.5_f64, 0).is_err());
    }

    #[test]
    fn nb_examples() {
        assert!((nb_pmf(1, 0.5_f64, 3).unwrap() - 0.125).abs() < 1e-15);
        assert!((nb_pmf(2, 0.5_f64, 2).unwrap() - 0.25).abs() < 1e-15);
        let oracle = convolved_geometric(0.5, 3, 5)[5];
        assert!((oracle - 0.1875).abs() < 1e-15);
        assert!((nb_pmf(3, 0.5_f64, 5).unwrap() - oracle).abs() < 1e-14);
        assert_eq!(nb_pmf(3, 0.5_f64, 2).unwrap(), 0.0);
        assert!(nb_pmf(0, 0.5_f64, 2).is_err());
    }

    #[test]
    fn nb_matches_convolution_of_geometrics() {
        for k in 1..=6 {
            for p in [0.2, 0.5, 0.8] {
                let conv = convolved_geometric(p, k, 60);
                for (n, &want) in conv.iter().enumerate().skip(1) {
                    let got = nb_pmf(k as u64, p, n as u64).unwrap();
                    assert!((got - want).abs() < 1e-12, "k={k} p={p} n={n}");
                }
            }
        }
    }

    #[test]
    fn nb_truncated_mass_and_mean() {
        let window = |k: u64, p: f64, n_max: u64| {
            let mut mass = 0.0;
            let mut mean = 0.0;
            for n in k..=n_max {
                let f = nb_pmf(k, p, n).unwrap();
                mass += f;
                mean += n as f64 * f;
            }
            (mass, mean)
        };
        // Window k + 50/p for small k.
        for k in 1u64..=6 {
            for p in [0.2, 0.5, 0.8_f64] {
                let (mass, mean) = window(k, p, k + (50.0 / p).ceil() as u64);
                assert!(1.0 - mass < 1e-6, "k={k} p={p} deficit {}", 1.0 - mass);
                assert!(
                    (mean - k as f64 / p).abs() < 1e-4,
                    "k={k} p={p} mean {mean}"
                );
            }
        }
        // Larger k needs a window growing like sqrt(k)/p.
        for k in [10u64, 40, 200] {
            for p in [0.2, 0.5, 0.8_f64] {
                let kf = k as f64;
                let (mass, mean) = window(k, p, ((kf + 10.0 * kf.sqrt() + 50.0) / p).ceil() as u64);
                assert!(1.0 - mass < 1e-6, "k={k} p={p} deficit {}", 1.0 - mass);
                assert!((mean - kf / p).abs() < 1e-4, "k={k} p={p} mean {mean}");
            }
        }
    }

    #[test]
    fn nb_cdf_accumulates() {
        let c = nb_cdf(2, 0.5_f64, 3).unwrap();
        assert!((c - (0.25 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn nb_log_pmf_large_k_is_finite() {
        let k = 100_000u64;
        let p = 0.25_f64;
        let mode = (k as f64 / p) as u64;
        let lp = nb_log_pmf(k, p, mode).unwrap();
        assert!(lp.is_finite() && lp < 0.0);
        // near the mode the pmf is about 1/(σ√(2π)) with σ = √(k(1−p))/p
        let sigma = (k as f64 * (1.0 - p)).sqrt() / p;
        let approx = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert!((lp.exp() / approx - 1.0).abs() < 0.01);
    }

    #[test]
    fn moments_examples() {
        let m = geometric_moments(0.5_f64).unwrap();
        assert_eq!((m.nu, m.sigma2, m.gamma), (2.0, 2.0, 6.0));
        let m = geometric_moments(0.25_f64).unwrap();
        assert_eq!((m.nu, m.sigma2, m.gamma), (4.0, 12.0, 84.0));
        assert!(geometric_moments(1.0_f64).is_err());
    }

    #[test]
    fn moments_match_series() {
        // Direct summation of the pmf as an independent route.
        for p in [0.1, 0.3, 0.7_f64] {
            let m = geometric_moments(p).unwrap();
            let (mut mean, mut m2, mut m3) = (0.0, 0.0, 0.0);
            for h in 1..5000u64 {
                let f = geometric_pmf(p, h).unwrap();
                mean += h as f64 * f;
            }
            for h in 1..5000u64 {
                let f = geometric_pmf(p, h).unwrap();
                let d = h as f64 - mean;
                m2 += d * d * f;
                m3 += d * d * d * f;
            }
            assert!((mean - m.nu).abs() < 1e-9);
            assert!((m2 - m.sigma2).abs() < 1e-8 * m.sigma2);
            assert!((m3 - m.gamma).abs() < 1e-8 * m.gamma);
        }
    }

    #[test]
    fn multinomial_cov_example() {
        let c = multinomial_cov([0.25, 0.25, 0.5_f64]).unwrap();
        assert_eq!([c[0][0], c[1][1], c[2][2]], [0.75, 0.75, 0.5]);
        assert!((c[0][1] + 0.25).abs() < 1e-15);
        assert!((c[0][2] + 0.353_553_390_593_273_8).abs() < 1e-12);
        assert_eq!(c[0][2], c[1][2]);
        assert_eq!(c[2][0], c[0][2]);
    }

    #[test]
    fn multinomial_cov_rejects_bad_p() {
        assert!(multinomial_cov([0.5, 0.5, 0.0_f64]).is_err());
        assert!(multinomial_cov([0.3, 0.3, 0.3_f64]).is_err());
    }
}
