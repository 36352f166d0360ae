use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::special::ln_choose;
use crate::error::{domain, Error, Result};
use crate::scalar::{count, lit, unit_sum_tolerance, Real};

/// Finite discrete law of the observations X₁, X₂, ….
///
/// Either an explicit table of ascending support points with their
/// probabilities, or the binomial(r, α) shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "SpecRepr<T>",
    into = "SpecRepr<T>",
    bound(
        serialize = "T: Real + Serialize",
        deserialize = "T: Real + Deserialize<'de>"
    )
)]
pub enum DistributionSpec<T> {
    Table { support: Vec<T>, probs: Vec<T> },
    Binomial { r: u32, alpha: T },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BinomialTag {
    Binomial,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpecRepr<T> {
    Binomial { kind: BinomialTag, r: u32, alpha: T },
    Table { support: Vec<T>, probs: Vec<T> },
}

impl<T: Real> TryFrom<SpecRepr<T>> for DistributionSpec<T> {
    type Error = Error;

    fn try_from(repr: SpecRepr<T>) -> Result<Self> {
        match repr {
            SpecRepr::Binomial { r, alpha, .. } => Self::binomial(r, alpha),
            SpecRepr::Table { support, probs } => Self::table(support, probs),
        }
    }
}

impl<T: Real> From<DistributionSpec<T>> for SpecRepr<T> {
    fn from(spec: DistributionSpec<T>) -> Self {
        match spec {
            DistributionSpec::Binomial { r, alpha } => SpecRepr::Binomial {
                kind: BinomialTag::Binomial,
                r,
                alpha,
            },
            DistributionSpec::Table { support, probs } => SpecRepr::Table { support, probs },
        }
    }
}

impl<T: Real> DistributionSpec<T> {
    pub fn table(support: Vec<T>, probs: Vec<T>) -> Result<Self> {
        let spec = DistributionSpec::Table { support, probs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binomial(r: u32, alpha: T) -> Result<Self> {
        let spec = DistributionSpec::Binomial { r, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Binomial { r, alpha } => {
                if *r < 1 {
                    return domain(format!("binomial parameter r must be >= 1, got r={r}"));
                }
                if !(*alpha > T::zero() && *alpha < T::one()) {
                    return domain(format!(
                        "binomial parameter alpha must lie in (0, 1), got alpha={alpha}"
                    ));
                }
                Ok(())
            }
            DistributionSpec::Table { support, probs } => {
                if support.is_empty() {
                    return domain("table law has an empty support");
                }
                if support.len() != probs.len() {
                    return domain(format!(
                        "table law has {} support points but {} probabilities",
                        support.len(),
                        probs.len()
                    ));
                }
                if support.iter().any(|x| !x.is_finite()) {
                    return domain("support points must be finite");
                }
                if support.windows(2).any(|w| !(w[0] < w[1])) {
                    return domain("support must be strictly ascending without duplicates");
                }
                if probs.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
                    return domain("probabilities must be finite and nonnegative");
                }
                let total = probs.iter().fold(T::zero(), |a, &b| a + b);
                if (total - T::one()).abs() > unit_sum_tolerance::<T>(probs.len()) {
                    return domain(format!("probabilities sum to {total}, not 1"));
                }
                Ok(())
            }
        }
    }

    /// Support points and probabilities, binomial shorthand expanded.
    pub fn atoms(&self) -> (Vec<T>, Vec<T>) {
        match self {
            DistributionSpec::Table { support, probs } => (support.clone(), probs.clone()),
            DistributionSpec::Binomial { r, alpha } => {
                let r = u64::from(*r);
                let ln_a = alpha.ln();
                let ln_b = (-*alpha).ln_1p();
                let support = (0..=r).map(count::<T>).collect();
                let probs = (0..=r)
                    .map(|j| {
                        (ln_choose::<T>(r, j) + count::<T>(j) * ln_a + count::<T>(r - j) * ln_b)
                            .exp()
                    })
                    .collect();
                (support, probs)
            }
        }
    }

    /// The `r` of the binomial shorthand, if this is one.
    pub fn binomial_r(&self) -> Option<u32> {
        match self {
            DistributionSpec::Binomial { r, .. } => Some(*r),
            DistributionSpec::Table { .. } => None,
        }
    }

    pub fn sampler(&self) -> Sampler<T> {
        Sampler::new(self)
    }

    /// Loads a two-column `support,prob` CSV. A leading header row is skipped.
    pub fn from_table_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(p)) => {
                    support.push(lit(x));
                    probs.push(lit(p));
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: i + 1,
                        msg: "non-numeric entry".into(),
                    })
                }
            }
        }
        Self::table(support, probs)
    }
}

/// Inverse-cdf sampler over the positive-mass atoms of a law.
///
/// Zero-mass support points are dropped at construction, so index 0 is always
/// the lower endpoint and the last index the upper endpoint.
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    values: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> Sampler<T> {
    pub fn new(spec: &DistributionSpec<T>) -> Self {
        let (support, probs) = spec.atoms();
        let mut values = Vec::with_capacity(support.len());
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = T::zero();
        for (x, p) in support.into_iter().zip(probs) {
            if p > T::zero() {
                acc = acc + p;
                values.push(x);
                cumulative.push(acc);
            }
        }
        if let Some(last) = cumulative.last_mut() {
            *last = T::one();
        }
        Sampler { values, cumulative }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    /// Index of the atom selected by a uniform `u` in [0, 1): the first index
    /// whose cumulative probability exceeds `u`.
    #[inline]
    pub fn index_for(&self, u: T) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.values.len() - 1)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = lit::<T>(rng.random::<f64>());
        self.values[self.index_for(u)]
    }
}

/// Draws one observation from `spec`.
///
/// Rebuilds the cumulative table on every call; hold a [`Sampler`] for loops.
pub fn sample_x<T: Real, R: Rng + ?Sized>(spec: &DistributionSpec<T>, rng: &mut R) -> T {
    spec.sampler().sample(rng)
}
