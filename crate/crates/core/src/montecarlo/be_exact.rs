//! Exact Kolmogorov distance between a standardized negative binomial and Φ.

use crate::distributions::{gaussian_cdf, geometric_moments, nb_log_pmf};
use crate::error::{Error, Result};

/// Largest k the enumeration accepts.
pub const BE_MAX_K: u64 = 1 << 14;

/// Trials enumerated past the mean, in units of √k/p.
const TAIL_SPAN: f64 = 50.0;

/// Where the supremum was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeSupremum {
    pub supdist: f64,
    /// Trial count of the jump at which the supremum occurs.
    pub at_n: u64,
    /// True when attained just left of the jump (cdf before the jump).
    pub left_of_jump: bool,
}

/// sup_x |P(N_k* ≤ x) − Φ(x)| for N_k the k-th success time at success
/// probability `p`, N_k* = (N_k − k/p)/(σ√k).
///
/// The cdf of N_k* is a step function and Φ is increasing, so the supremum
/// is attained at a jump, on one side or the other. Jumps are enumerated for
/// n from k to k/p + 50√k/p; the mass beyond is far below 1e-10.
pub fn exact_be_supremum(k: u64, p: f64) -> Result<BeSupremum> {
    if k > BE_MAX_K {
        return Err(Error::BudgetExceeded(format!(
            "exact Berry-Esseen enumeration supports k <= {BE_MAX_K}, got {k}"
        )));
    }
    let m = geometric_moments(p)?;
    if k < 1 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let kf = k as f64;
    let mean = kf * m.nu;
    let scale = m.sigma() * kf.sqrt();
    let n_hi = (mean + TAIL_SPAN * kf.sqrt() / p).ceil() as u64;

    let mut best = BeSupremum {
        supdist: 0.0,
        at_n: k,
        left_of_jump: true,
    };
    // Neumaier-compensated running cdf.
    let mut cdf = 0.0_f64;
    let mut carry = 0.0_f64;
    for n in k..=n_hi {
        let phi = gaussian_cdf((n as f64 - mean) / scale);
        let left = (cdf + carry - phi).abs();
        if left > best.supdist {
            best = BeSupremum {
                supdist: left,
                at_n: n,
                left_of_jump: true,
            };
        }
        let term = nb_log_pmf(k, p, n)?.exp();
        let t = cdf + term;
        carry += if cdf.abs() >= term.abs() {
            (cdf - t) + term
        } else {
            (term - t) + cdf
        };
        cdf = t;
        let right = (cdf + carry - phi).abs();
        if right > best.supdist {
            best = BeSupremum {
                supdist: right,
                at_n: n,
                left_of_jump: false,
            };
        }
    }
    Ok(best)
}

pub fn exact_be_supdist(k: u64, p: f64) -> Result<f64> {
    exact_be_supremum(k, p).map(|s| s.supdist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::be_bound;

    #[test]
    fn hand_enumerated_geometric() {
        // Jumps of geometric(1/2) standardized by (n − 2)/√2; the largest gap is
        // just right of n = 1: 0.5 − Φ(−1/√2).
        let want = 0.5 - gaussian_cdf(-std::f64::consts::FRAC_1_SQRT_2);
        let got = exact_be_supremum(1, 0.5).unwrap();
        assert!((got.supdist - want).abs() < 1e-15);
        assert!((got.supdist - 0.2602).abs() < 1e-4);
        assert_eq!((got.at_n, got.left_of_jump), (1, false));
    }

    #[test]
    fn within_bound_and_decaying() {
        for p in [0.25, 0.5] {
            for k in [1, 7, 64, 300] {
                let d = exact_be_supdist(k, p).unwrap();
                assert!(d <= be_bound(k, &geometric_moments(p).unwrap()));
            }
        }
        assert!(exact_be_supdist(4096, 0.5).unwrap() < exact_be_supdist(64, 0.5).unwrap());
    }

    #[test]
    fn budget() {
        assert!(matches!(
            exact_be_supdist(BE_MAX_K + 1, 0.5),
            Err(Error::BudgetExceeded(_))
        ));
        assert!(exact_be_supdist(0, 0.5).is_err());
        assert!(exact_be_supdist(3, 1.5).is_err());
    }
}
