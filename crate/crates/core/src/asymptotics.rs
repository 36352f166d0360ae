//! Normalizers, envelopes, bounds and interval constructions for the hitting
//! times N_k and the hit counts M_n.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_quantile, GeometricMoments};
use crate::error::{domain, Error, Result};
use crate::record_engine::{AtomEndpoints, HitCounts};
use crate::scalar::{count, lit, Real};

/// Asymptotic variances for comparing the lower and upper hit counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonLaw<T> {
    pub p1: T,
    pub p2: T,
    /// Published variance of √n(M₁/M₂ − p₁/p₂):
    /// (p₁/p₂)(p₂²(1−p₁) + p₁²(1−p₂) + 2(p₁p₂)^{3/2}).
    pub gamma2: T,
    /// Variance of √n((M₁−M₂)/n − (p₁−p₂)): p₁(1−p₁) + p₂(1−p₂) + 2p₁p₂.
    pub delta2: T,
    /// First-order (delta-method) variance of √n(M₁/M₂ − p₁/p₂): p₁(p₁+p₂)/p₂³.
    /// Disagrees with `gamma2`; at p₁ = p₂ = p it is 2/p against 2p².
    pub ratio_variance: T,
}

pub fn comparison_law<T: Real>(p1: T, p2: T) -> Result<ComparisonLaw<T>> {
    if !(p1 > T::zero() && p2 > T::zero() && p1 + p2 < T::one()) {
        return domain(format!(
            "comparison_law requires p1, p2 > 0 and p1 + p2 < 1, got ({p1}, {p2})"
        ));
    }
    let one = T::one();
    let two = lit::<T>(2.0);
    let gamma2 =
        (p1 / p2) * (p2 * p2 * (one - p1) + p1 * p1 * (one - p2) + two * (p1 * p2).powf(lit(1.5)));
    let delta2 = p1 * (one - p1) + p2 * (one - p2) + two * p1 * p2;
    let ratio_variance = p1 * (p1 + p2) / (p2 * p2 * p2);
    Ok(ComparisonLaw {
        p1,
        p2,
        gamma2,
        delta2,
        ratio_variance,
    })
}

/// (N_k − kν) / (σ√k).
pub fn clt_standardize<T: Real>(n_k: u64, k: u64, m: &GeometricMoments<T>) -> T {
    let k_t = count::<T>(k);
    (count::<T>(n_k) - k_t * m.nu) / (m.sigma() * k_t.sqrt())
}

/// c·σ·√(2k ln ln k), defined for k ≥ 16.
pub fn lil_envelope<T: Real>(k: u64, m: &GeometricMoments<T>, c: T) -> Result<T> {
    if k < 16 {
        return domain(format!("lil_envelope requires k >= 16, got {k}"));
    }
    let k_t = count::<T>(k);
    Ok(c * m.sigma() * (lit::<T>(2.0) * k_t * k_t.ln().ln()).sqrt())
}

/// 36γ/√k with γ the third central moment of the geometric increment.
pub fn be_bound<T: Real>(k: u64, m: &GeometricMoments<T>) -> T {
    lit::<T>(36.0) * m.gamma / count::<T>(k).sqrt()
}

/// Component i is (mᵢ − npᵢ)/√(npᵢ). Requires every pᵢ > 0 and n ≥ 1.
pub fn multinomial_standardize<T: Real>(m: &HitCounts, p: [T; 3]) -> [T; 3] {
    let n = count::<T>(m.n);
    let counts = m.as_array();
    std::array::from_fn(|i| {
        let mean = n * p[i];
        (count::<T>(counts[i]) - mean) / mean.sqrt()
    })
}

/// √n (m₁/m₂ − p₁/p₂).
pub fn ratio_stat<T: Real>(m: &HitCounts, ep: &AtomEndpoints<T>) -> Result<T> {
    if m.m2 == 0 {
        return Err(Error::RatioUndefined);
    }
    let ratio = count::<T>(m.m1) / count::<T>(m.m2);
    Ok(count::<T>(m.n).sqrt() * (ratio - ep.p1 / ep.p2))
}

/// √n ((m₁ − m₂)/n − (p₁ − p₂)). Requires n ≥ 1.
pub fn diff_stat<T: Real>(m: &HitCounts, ep: &AtomEndpoints<T>) -> T {
    let n = count::<T>(m.n);
    let diff = (count::<T>(m.m1) - count::<T>(m.m2)) / n;
    n.sqrt() * (diff - (ep.p1 - ep.p2))
}

/// Whether the dominant endpoint leads by at least nβ hits:
/// m_major − m_minor ≥ nβ, with major the endpoint of larger mass.
pub fn dominance_holds<T: Real>(m: &HitCounts, ep: &AtomEndpoints<T>, beta: T) -> Result<bool> {
    let gap = (ep.p1 - ep.p2).abs();
    if !(beta > T::zero() && beta < gap) {
        return domain(format!(
            "beta must lie in (0, |p1 - p2|) = (0, {gap}), got {beta}"
        ));
    }
    let (major, minor) = if ep.p1 > ep.p2 {
        (m.m1, m.m2)
    } else {
        (m.m2, m.m1)
    };
    let lead = count::<T>(major) - count::<T>(minor);
    Ok(lead >= count::<T>(m.n) * beta)
}

/// Closed interval [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn centered(center: T, halfwidth: T) -> Self {
        Interval {
            lo: center - halfwidth,
            hi: center + halfwidth,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn halfwidth(&self) -> T {
        (self.hi - self.lo) * lit(0.5)
    }
}

/// Confidence interval construction for the ratio M₁/M₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiFormula {
    /// m₁/m₂ ± z·√γ²/√n with the published γ².
    Corrected,
    /// 1 ± 2ʳ z/√(2n), as printed for binomial(r, 1/2).
    #[serde(alias = "as_published")]
    AsPublished,
    /// m₁/m₂ ± z·√v/√n with v the delta-method variance.
    DeltaMethod,
}

impl CiFormula {
    pub const ALL: [CiFormula; 3] = [
        CiFormula::Corrected,
        CiFormula::AsPublished,
        CiFormula::DeltaMethod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CiFormula::Corrected => "corrected",
            CiFormula::AsPublished => "as-published",
            CiFormula::DeltaMethod => "delta-method",
        }
    }
}

impl fmt::Display for CiFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CiFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(CiFormula::Corrected),
            "as-published" | "as_published" => Ok(CiFormula::AsPublished),
            "delta-method" | "delta_method" => Ok(CiFormula::DeltaMethod),
            other => domain(format!(
                "unknown formula {other:?} (expected corrected|as-published|delta-method)"
            )),
        }
    }
}

/// Halfwidth of the ratio interval at sample size `n`; it does not depend on
/// the counts. `binomial_r` is required by the as-published formula, which is
/// only defined when p₁ = p₂.
pub fn ratio_ci_halfwidth<T: Real>(
    n: u64,
    ep: &AtomEndpoints<T>,
    u: T,
    formula: CiFormula,
    binomial_r: Option<u32>,
) -> Result<T> {
    if !(u > T::zero() && u < T::one()) {
        return domain(format!("u must lie in (0, 1), got {u}"));
    }
    if n < 1 {
        return domain("n must be >= 1");
    }
    let z = gaussian_quantile(T::one() - u * lit(0.5))?;
    let n_t = count::<T>(n);
    match formula {
        CiFormula::AsPublished => {
            let tol = lit::<T>(1e-12).max(T::epsilon() * lit(8.0));
            if (ep.p1 - ep.p2).abs() > tol * ep.p1.max(ep.p2) {
                return domain("as-published interval requires p1 = p2");
            }
            let r = binomial_r.ok_or_else(|| {
                Error::Domain("as-published interval requires a binomial r".into())
            })?;
            let scale = lit::<T>(2.0).powi(r as i32);
            Ok(scale * z / (lit::<T>(2.0) * n_t).sqrt())
        }
        CiFormula::Corrected | CiFormula::DeltaMethod => {
            let law = comparison_law(ep.p1, ep.p2)?;
            let var = if formula == CiFormula::Corrected {
                law.gamma2
            } else {
                law.ratio_variance
            };
            Ok(z * var.sqrt() / n_t.sqrt())
        }
    }
}

pub fn ratio_ci<T: Real>(
    m: &HitCounts,
    ep: &AtomEndpoints<T>,
    u: T,
    formula: CiFormula,
    binomial_r: Option<u32>,
) -> Result<Interval<T>> {
    if m.m2 == 0 {
        return Err(Error::RatioUndefined);
    }
    let hw = ratio_ci_halfwidth(m.n, ep, u, formula, binomial_r)?;
    let center = match formula {
        CiFormula::AsPublished => T::one(),
        _ => count::<T>(m.m1) / count::<T>(m.m2),
    };
    Ok(Interval::centered(center, hw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{geometric_moments, DistributionSpec};
    use crate::record_engine::endpoints_of;

    fn ep(r: u32, alpha: f64) -> AtomEndpoints<f64> {
        endpoints_of(&DistributionSpec::binomial(r, alpha).unwrap()).unwrap()
    }

    #[test]
    fn clt_examples() {
        let m = geometric_moments(0.25).unwrap();
        assert_eq!(clt_standardize(40, 10, &m), 0.0);
        let z = clt_standardize(46, 10, &m);
        assert!((z - 6.0 / (12f64.sqrt() * 10f64.sqrt())).abs() < 1e-15);
        assert!((z - 0.5477).abs() < 1e-4);
    }

    #[test]
    fn lil_examples() {
        let m = geometric_moments(0.5).unwrap();
        let e = lil_envelope(100, &m, 1.0).unwrap();
        let lnln = 100f64.ln().ln();
        assert!((lnln - 1.52718).abs() < 1e-5);
        assert!((e - 2f64.sqrt() * (200.0 * lnln).sqrt()).abs() < 1e-12);
        assert!((e - 24.715).abs() < 2e-3);
        assert_eq!(lil_envelope(100, &m, 2.0).unwrap(), 2.0 * e);
        assert!(lil_envelope(15, &m, 1.0).is_err());
    }

    #[test]
    fn lil_envelope_quadrupling() {
        // envelope(4k)/envelope(k) = 2·√(lnln 4k / lnln k): above 2, shrinking toward 2.
        let m = geometric_moments(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1_000u64, 10_000, 100_000, 1_000_000, 10_000_000] {
            let ratio = lil_envelope(4 * k, &m, 1.0).unwrap() / lil_envelope(k, &m, 1.0).unwrap();
            assert!(ratio > 2.0 && ratio < 2.1, "k={k} ratio={ratio}");
            assert!(ratio < prev);
            prev = ratio;
        }
    }

    #[test]
    fn be_examples() {
        assert!((be_bound(100, &geometric_moments(0.5_f64).unwrap()) - 21.6).abs() < 1e-12);
        assert_eq!(be_bound(1, &geometric_moments(0.25).unwrap()), 3024.0);
    }

    #[test]
    fn multinomial_standardize_examples() {
        let p = [0.25, 0.25, 0.5];
        assert_eq!(
            multinomial_standardize(&HitCounts::new(2500, 2500, 5000), p),
            [0.0; 3]
        );
        let z = multinomial_standardize(&HitCounts::new(2550, 2450, 5000), p);
        assert_eq!(z, [1.0, -1.0, 0.0]);
    }

    #[test]
    fn ratio_and_diff_at_center() {
        let e = ep(2, 0.5);
        assert_eq!(ratio_stat(&HitCounts::new(300, 300, 400), &e).unwrap(), 0.0);
        assert!(matches!(
            ratio_stat(&HitCounts::new(3, 0, 4), &e),
            Err(Error::RatioUndefined)
        ));
        assert_eq!(diff_stat(&HitCounts::new(250, 250, 500), &e), 0.0);
        let e7 = ep(2, 0.7);
        // n(p1 − p2) = 100·(0.09 − 0.49) = −40
        assert!(diff_stat(&HitCounts::new(9, 49, 42), &e7).abs() < 1e-12);
    }

    #[test]
    fn comparison_law_examples() {
        let c = comparison_law(0.25_f64, 0.25).unwrap();
        assert!((c.gamma2 - 0.125).abs() < 1e-15);
        assert!((c.delta2 - 0.5).abs() < 1e-15);
        assert!((c.ratio_variance - 8.0).abs() < 1e-12);

        let e7 = ep(2, 0.7);
        assert!((e7.p1 - 0.09).abs() < 1e-15 && (e7.p2 - 0.49).abs() < 1e-15);
        let c = comparison_law(e7.p1, e7.p2).unwrap();
        assert!((c.delta2 - 0.42).abs() < 1e-12);
        // (0.09/0.49)(0.49²·0.91 + 0.09²·0.51 + 2·0.0441^{3/2})
        let by_hand = (0.09 / 0.49) * (0.2401 * 0.91 + 0.0081 * 0.51 + 2.0 * 0.009261);
        assert!((c.gamma2 - by_hand).abs() < 1e-15);
        assert!((c.gamma2 - 0.044292).abs() < 1e-6);
        assert!(comparison_law(0.5, 0.5).is_err());
        assert!(comparison_law(0.0, 0.5).is_err());
    }

    #[test]
    fn dominance_examples() {
        let e = AtomEndpoints::new(0.0, 1.0, 0.4, 0.1, 0.5).unwrap();
        assert!(dominance_holds(&HitCounts::new(300, 100, 600), &e, 0.1).unwrap());
        assert!(!dominance_holds(&HitCounts::new(150, 100, 750), &e, 0.1).unwrap());
        assert!(dominance_holds(&HitCounts::new(300, 100, 600), &e, 0.31).is_err());
        assert!(dominance_holds(&HitCounts::new(300, 100, 600), &e, 0.0).is_err());
        // upper endpoint dominant
        let e7 = ep(2, 0.7);
        assert!(dominance_holds(&HitCounts::new(100, 500, 400), &e7, 0.2).unwrap());
    }

    #[test]
    fn ci_examples() {
        let e = ep(2, 0.5);
        let m = HitCounts::new(2500, 2500, 5000);
        let c = ratio_ci(&m, &e, 0.05, CiFormula::Corrected, Some(2)).unwrap();
        assert!((c.halfwidth() - 1.959964 * 0.125f64.sqrt() / 100.0).abs() < 1e-8);
        assert!((c.halfwidth() - 0.006930).abs() < 1e-6);
        let a = ratio_ci(&m, &e, 0.05, CiFormula::AsPublished, Some(2)).unwrap();
        assert!((a.halfwidth() - 4.0 * 1.959964 / 20_000f64.sqrt()).abs() < 1e-7);
        assert!((a.halfwidth() - 0.055437).abs() < 1e-6);
        assert!((a.halfwidth() / c.halfwidth() - 8.0).abs() < 1e-12);
        // 1/√n scaling
        let h1 = ratio_ci_halfwidth(10_000, &e, 0.05, CiFormula::Corrected, None).unwrap();
        let h4 = ratio_ci_halfwidth(40_000, &e, 0.05, CiFormula::Corrected, None).unwrap();
        assert!((h1 / h4 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ci_errors() {
        let e = ep(2, 0.5);
        let m0 = HitCounts::new(10, 0, 10);
        assert!(matches!(
            ratio_ci(&m0, &e, 0.05, CiFormula::Corrected, None),
            Err(Error::RatioUndefined)
        ));
        let m = HitCounts::new(10, 10, 10);
        assert!(ratio_ci(&m, &ep(2, 0.7), 0.05, CiFormula::AsPublished, Some(2)).is_err());
        assert!(ratio_ci(&m, &e, 0.05, CiFormula::AsPublished, None).is_err());
        assert!(ratio_ci(&m, &e, 1.0, CiFormula::Corrected, None).is_err());
    }

    #[test]
    fn halfwidth_ratio_is_power_of_two() {
        // γ² = 2^{1−2r} at α = 1/2, so the printed interval is 2^{2r−1} times wider.
        for r in 1..=6u32 {
            let e = ep(r, 0.5);
            if !e.satisfies_standing_assumption() {
                continue;
            }
            let c = ratio_ci_halfwidth(1000, &e, 0.1, CiFormula::Corrected, Some(r)).unwrap();
            let a = ratio_ci_halfwidth(1000, &e, 0.1, CiFormula::AsPublished, Some(r)).unwrap();
            let want = 2f64.powi(2 * r as i32 - 1);
            assert!((a / c / want - 1.0).abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn formula_names() {
        for f in CiFormula::ALL {
            assert_eq!(f.as_str().parse::<CiFormula>().unwrap(), f);
        }
        assert_eq!(
            "as_published".parse::<CiFormula>().unwrap(),
            CiFormula::AsPublished
        );
    }
}
