//! Strong upper records and the three endpoint hitting processes over an
//! observation sequence, simulated or supplied.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Sampler};
use crate::error::{domain, Error, Result};
use crate::scalar::{lit, unit_sum_tolerance, Real};

/// Endpoints of a discrete law and the masses they carry.
///
/// `p1` is the mass at `lep`, `p2` the mass at `uep`, `p3` the mass elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomEndpoints<T> {
    pub lep: T,
    pub uep: T,
    pub p1: T,
    pub p2: T,
    pub p3: T,
}

impl<T: Real> AtomEndpoints<T> {
    pub fn new(lep: T, uep: T, p1: T, p2: T, p3: T) -> Result<Self> {
        if !(lep < uep) {
            return domain(format!("lep ({lep}) must be below uep ({uep})"));
        }
        if [p1, p2, p3]
            .iter()
            .any(|&p| !(p >= T::zero() && p <= T::one()))
        {
            return domain("endpoint masses must be probabilities");
        }
        if (p1 + p2 + p3 - T::one()).abs() > unit_sum_tolerance::<T>(3) {
            return domain("endpoint masses must sum to 1");
        }
        Ok(AtomEndpoints {
            lep,
            uep,
            p1,
            p2,
            p3,
        })
    }

    /// 0 < p1 + p2 < 1 with both endpoint masses positive, i.e. all three
    /// outcome classes have positive probability.
    pub fn satisfies_standing_assumption(&self) -> bool {
        self.p1 > T::zero() && self.p2 > T::zero() && self.p3 > T::zero()
    }

    pub fn mass(&self, endpoint: Endpoint) -> T {
        match endpoint {
            Endpoint::Lower => self.p1,
            Endpoint::Upper => self.p2,
            Endpoint::Neither => self.p3,
        }
    }

    pub fn p_vector(&self) -> [T; 3] {
        [self.p1, self.p2, self.p3]
    }
}

/// Endpoints of `spec`: the extreme support points carrying positive mass.
pub fn endpoints_of<T: Real>(spec: &DistributionSpec<T>) -> Result<AtomEndpoints<T>> {
    let (support, probs) = spec.atoms();
    let positive: Vec<(T, T)> = support
        .into_iter()
        .zip(probs)
        .filter(|&(_, p)| p > T::zero())
        .collect();
    let (&(lep, p1), &(uep, p2)) = match (positive.first(), positive.last()) {
        (Some(a), Some(b)) if positive.len() >= 2 => (a, b),
        _ => return Err(Error::NoDistinctEndpoints),
    };
    let p3 = positive[1..positive.len() - 1]
        .iter()
        .fold(T::zero(), |acc, &(_, p)| acc + p);
    Ok(AtomEndpoints {
        lep,
        uep,
        p1,
        p2,
        p3,
    })
}

/// Which of the three events an observation realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Lep,
    Mid,
    Uep,
}

#[inline]
pub fn classify_outcome<T: Real>(x: T, ep: &AtomEndpoints<T>) -> Outcome {
    if x == ep.lep {
        Outcome::Lep
    } else if x == ep.uep {
        Outcome::Uep
    } else {
        Outcome::Mid
    }
}

/// Hitting-process selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Lower,
    Upper,
    Neither,
}

impl Endpoint {
    #[inline]
    pub fn matches(self, outcome: Outcome) -> bool {
        matches!(
            (self, outcome),
            (Endpoint::Lower, Outcome::Lep)
                | (Endpoint::Upper, Outcome::Uep)
                | (Endpoint::Neither, Outcome::Mid)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Lower => "lower",
            Endpoint::Upper => "upper",
            Endpoint::Neither => "neither",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Endpoint::Lower),
            "upper" => Ok(Endpoint::Upper),
            "neither" => Ok(Endpoint::Neither),
            other => domain(format!(
                "unknown endpoint {other:?} (expected lower|upper|neither)"
            )),
        }
    }
}

/// Record values X^(1) < X^(2) < … and record times U(1) < U(2) < ….
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTrace<T> {
    pub record_values: Vec<T>,
    pub record_times: Vec<u64>,
    /// The running maximum reached the upper endpoint.
    pub terminated: bool,
    /// Observations consumed.
    pub horizon: u64,
}

impl<T: Real> RecordTrace<T> {
    pub fn record_count(&self) -> usize {
        self.record_values.len()
    }
}

/// Streaming strict-increase record detector.
#[derive(Debug, Clone)]
pub struct RecordTracker<T> {
    uep: Option<T>,
    trace: RecordTrace<T>,
}

impl<T: Real> RecordTracker<T> {
    pub fn new(uep: Option<T>) -> Self {
        RecordTracker {
            uep,
            trace: RecordTrace {
                record_values: Vec::new(),
                record_times: Vec::new(),
                terminated: false,
                horizon: 0,
            },
        }
    }

    /// Feeds the next observation; returns true if it is a new record.
    pub fn push(&mut self, x: T) -> bool {
        self.trace.horizon += 1;
        let is_record = match self.trace.record_values.last() {
            None => true,
            Some(&max) => x > max,
        };
        if is_record {
            self.trace.record_values.push(x);
            self.trace.record_times.push(self.trace.horizon);
            self.trace.terminated = self.uep == Some(x);
        }
        is_record
    }

    pub fn terminated(&self) -> bool {
        self.trace.terminated
    }

    pub fn finish(self) -> RecordTrace<T> {
        self.trace
    }
}

/// Records of a supplied sequence. `uep`, when known, sets the termination flag.
pub fn record_trace_from_stream<T: Real>(
    stream: impl IntoIterator<Item = T>,
    uep: Option<T>,
) -> RecordTrace<T> {
    let mut tracker = RecordTracker::new(uep);
    for x in stream {
        tracker.push(x);
    }
    tracker.finish()
}

/// Records of a freshly simulated sequence of at most `horizon` observations.
///
/// Stops early once the running maximum equals the upper endpoint: no later
/// observation can exceed it.
pub fn run_record_trace<T: Real, R: Rng + ?Sized>(
    sampler: &Sampler<T>,
    horizon: u64,
    rng: &mut R,
) -> Result<RecordTrace<T>> {
    if horizon < 1 {
        return domain("horizon must be >= 1");
    }
    let uep = *sampler
        .values()
        .last()
        .expect("sampler has at least one atom");
    let mut tracker = RecordTracker::new(Some(uep));
    for _ in 0..horizon {
        tracker.push(sampler.sample(rng));
        if tracker.terminated() {
            break;
        }
    }
    Ok(tracker.finish())
}

/// The first hit indices (1-based) of one hitting process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HittingTimes {
    pub endpoint: Endpoint,
    pub times: Vec<u64>,
    /// The stream ended before `k_max` hits were seen.
    pub exhausted: bool,
}

pub fn hitting_times<T: Real>(
    stream: impl IntoIterator<Item = T>,
    ep: &AtomEndpoints<T>,
    endpoint: Endpoint,
    k_max: usize,
) -> Result<HittingTimes> {
    if k_max < 1 {
        return domain("k_max must be >= 1");
    }
    let mut times = Vec::with_capacity(k_max.min(1 << 16));
    for (i, x) in stream.into_iter().enumerate() {
        if endpoint.matches(classify_outcome(x, ep)) {
            times.push(i as u64 + 1);
            if times.len() == k_max {
                break;
            }
        }
    }
    let exhausted = times.len() < k_max;
    Ok(HittingTimes {
        endpoint,
        times,
        exhausted,
    })
}

/// Counts of lower-endpoint, upper-endpoint and neither outcomes among the
/// first `n` observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitCounts {
    pub n: u64,
    pub m1: u64,
    pub m2: u64,
    pub m3: u64,
}

impl HitCounts {
    pub fn new(m1: u64, m2: u64, m3: u64) -> Self {
        HitCounts {
            n: m1 + m2 + m3,
            m1,
            m2,
            m3,
        }
    }

    #[inline]
    pub fn record(&mut self, outcome: Outcome) {
        self.n += 1;
        match outcome {
            Outcome::Lep => self.m1 += 1,
            Outcome::Uep => self.m2 += 1,
            Outcome::Mid => self.m3 += 1,
        }
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.m1, self.m2, self.m3]
    }
}

pub fn hit_counts<T: Real>(
    stream: impl IntoIterator<Item = T>,
    ep: &AtomEndpoints<T>,
    n: u64,
) -> Result<HitCounts> {
    let mut counts = HitCounts::default();
    for x in stream.into_iter().take(n as usize) {
        counts.record(classify_outcome(x, ep));
    }
    if counts.n < n {
        return Err(Error::StreamTooShort {
            need: n,
            got: counts.n,
        });
    }
    Ok(counts)
}

/// Draws outcome classes directly from the uniform stream.
///
/// For the same random stream this yields exactly
/// `classify_outcome(sampler.sample(rng), ep)`: the lower endpoint is the first
/// atom of the inverse-cdf table and the upper endpoint the last, so only two
/// thresholds need comparing.
#[derive(Debug, Clone, Copy)]
pub struct OutcomeSampler {
    lower_below: f64,
    upper_from: f64,
}

impl OutcomeSampler {
    pub fn new<T: Real>(sampler: &Sampler<T>) -> Result<Self> {
        let cum = sampler.cumulative();
        if cum.len() < 2 {
            return Err(Error::NoDistinctEndpoints);
        }
        let to_f64 = |c: T| c.to_f64().expect("probability representable as f64");
        Ok(OutcomeSampler {
            lower_below: to_f64(cum[0]),
            upper_from: to_f64(cum[cum.len() - 2]),
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let u: f64 = rng.random();
        if u < self.lower_below {
            Outcome::Lep
        } else if u >= self.upper_from {
            Outcome::Uep
        } else {
            Outcome::Mid
        }
    }

    /// Counts over `n` fresh draws.
    pub fn counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> HitCounts {
        let mut c = HitCounts::default();
        for _ in 0..n {
            c.record(self.sample(rng));
        }
        c
    }

    /// Index of the k-th draw matching `endpoint`, or `None` if `cap` draws pass first.
    pub fn kth_hit<R: Rng + ?Sized>(
        &self,
        endpoint: Endpoint,
        k: u64,
        cap: u64,
        rng: &mut R,
    ) -> Option<u64> {
        let mut hits = 0;
        for t in 1..=cap {
            if endpoint.matches(self.sample(rng)) {
                hits += 1;
                if hits == k {
                    return Some(t);
                }
            }
        }
        None
    }
}

/// Parses an observation stream: one decimal value per line, blank lines ignored.
pub fn read_stream<T: Real, R: BufRead>(reader: R, origin: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let x: f64 = text.parse().map_err(|_| Error::Parse {
            path: origin.to_owned(),
            line: i + 1,
            msg: format!("not a decimal number: {text:?}"),
        })?;
        out.push(lit(x));
    }
    Ok(out)
}

pub fn read_stream_file<T: Real>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    read_stream(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ep_binom2() -> AtomEndpoints<f64> {
        endpoints_of(&DistributionSpec::binomial(2, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn endpoints_of_binomial() {
        let ep = ep_binom2();
        assert_eq!((ep.lep, ep.uep), (0.0, 2.0));
        assert!((ep.p1 - 0.25).abs() < 1e-15);
        assert!((ep.p2 - 0.25).abs() < 1e-15);
        assert!((ep.p3 - 0.5).abs() < 1e-15);
        assert!(ep.satisfies_standing_assumption());

        let ep3 = endpoints_of(&DistributionSpec::binomial(3, 0.5_f64).unwrap()).unwrap();
        assert!((ep3.p1 - 0.125).abs() < 1e-15 && (ep3.p2 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn endpoints_of_two_point_law_flags_empty_middle() {
        let spec = DistributionSpec::table(vec![-1.0, 7.0], vec![0.3, 0.7_f64]).unwrap();
        let ep = endpoints_of(&spec).unwrap();
        assert_eq!(
            (ep.lep, ep.uep, ep.p1, ep.p2, ep.p3),
            (-1.0, 7.0, 0.3, 0.7, 0.0)
        );
        assert!(!ep.satisfies_standing_assumption());
    }

    #[test]
    fn endpoints_of_single_atom_fails() {
        let spec = DistributionSpec::table(vec![4.0], vec![1.0_f64]).unwrap();
        assert!(matches!(
            endpoints_of(&spec),
            Err(Error::NoDistinctEndpoints)
        ));
        // zero-mass neighbours do not create endpoints
        let spec = DistributionSpec::table(vec![1.0, 4.0], vec![0.0, 1.0_f64]).unwrap();
        assert!(matches!(
            endpoints_of(&spec),
            Err(Error::NoDistinctEndpoints)
        ));
    }

    #[test]
    fn classify() {
        let ep = ep_binom2();
        assert_eq!(classify_outcome(0.0, &ep), Outcome::Lep);
        assert_eq!(classify_outcome(1.0, &ep), Outcome::Mid);
        assert_eq!(classify_outcome(2.0, &ep), Outcome::Uep);
    }

    #[test]
    fn records_by_definition() {
        let t = record_trace_from_stream([1.0, 3.0, 2.0, 5.0_f64], None);
        assert_eq!(t.record_values, vec![1.0, 3.0, 5.0]);
        assert_eq!(t.record_times, vec![1, 2, 4]);
        assert!(!t.terminated);
        assert_eq!(t.horizon, 4);
    }

    #[test]
    fn records_stop_at_atom_uep() {
        let t = record_trace_from_stream([0.0, 2.0, 1.0, 2.0_f64], Some(2.0));
        assert_eq!(t.record_values, vec![0.0, 2.0]);
        assert_eq!(t.record_times, vec![1, 2]);
        assert!(t.terminated);
    }

    #[test]
    fn ties_do_not_extend_records() {
        let t = record_trace_from_stream([1.0, 1.0, 1.0_f64], None);
        assert_eq!(t.record_times, vec![1]);
    }

    #[test]
    fn hitting_examples() {
        let ep = ep_binom2();
        let s = [1.0, 2.0, 0.0, 2.0, 2.0];
        let up = hitting_times(s, &ep, Endpoint::Upper, 3).unwrap();
        assert_eq!(up.times, vec![2, 4, 5]);
        assert!(!up.exhausted);
        let low = hitting_times(s, &ep, Endpoint::Lower, 2).unwrap();
        assert_eq!(low.times, vec![3]);
        assert!(low.exhausted);
        assert!(hitting_times(s, &ep, Endpoint::Upper, 0).is_err());
    }

    #[test]
    fn hit_count_examples() {
        let ep = ep_binom2();
        let c = hit_counts([0.0, 2.0, 1.0, 2.0], &ep, 4).unwrap();
        assert_eq!(
            c,
            HitCounts {
                n: 4,
                m1: 1,
                m2: 2,
                m3: 1
            }
        );
        assert!(matches!(
            hit_counts([0.0, 2.0], &ep, 4),
            Err(Error::StreamTooShort { need: 4, got: 2 })
        ));
    }

    #[test]
    fn outcome_sampler_agrees_with_classified_draws() {
        for spec in [
            DistributionSpec::binomial(2, 0.5).unwrap(),
            DistributionSpec::binomial(4, 0.7).unwrap(),
            DistributionSpec::table(vec![-1.0, 7.0], vec![0.3, 0.7]).unwrap(),
        ] {
            let sampler = spec.sampler();
            let ep = endpoints_of(&spec).unwrap();
            let fast = OutcomeSampler::new(&sampler).unwrap();
            let mut a = ChaCha8Rng::seed_from_u64(77);
            let mut b = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..100_000 {
                assert_eq!(
                    fast.sample(&mut a),
                    classify_outcome(sampler.sample(&mut b), &ep)
                );
            }
        }
    }

    #[test]
    fn simulated_trace_terminates_early() {
        let sampler = DistributionSpec::binomial(2, 0.5_f64).unwrap().sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = run_record_trace(&sampler, 10_000, &mut rng).unwrap();
        assert!(t.terminated);
        assert_eq!(*t.record_values.last().unwrap(), 2.0);
        assert_eq!(t.horizon, *t.record_times.last().unwrap());
        assert!(run_record_trace(&sampler, 0, &mut rng).is_err());
    }

    #[test]
    fn stream_parsing() {
        let text = "1.5\n\n  -2\n3e1\n";
        let v: Vec<f64> = read_stream(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(v, vec![1.5, -2.0, 30.0]);
        let err = read_stream::<f64, _>("1\nabc\n".as_bytes(), Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
