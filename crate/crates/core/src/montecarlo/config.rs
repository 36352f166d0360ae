use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{comparison_law, CiFormula};
use crate::distributions::{multinomial_cov, DistributionSpec};
use crate::error::{config, Error, Result};
use crate::montecarlo::be_exact::BE_MAX_K;
use crate::record_engine::{endpoints_of, AtomEndpoints, Endpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    HittingLaw,
    Clt,
    Lil,
    BeExact,
    Multinomial,
    Ratio,
    Difference,
    Dominance,
    Coverage,
    Finiteness,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::HittingLaw,
        ExperimentKind::Clt,
        ExperimentKind::Lil,
        ExperimentKind::BeExact,
        ExperimentKind::Multinomial,
        ExperimentKind::Ratio,
        ExperimentKind::Difference,
        ExperimentKind::Dominance,
        ExperimentKind::Coverage,
        ExperimentKind::Finiteness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::HittingLaw => "hitting-law",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Lil => "lil",
            ExperimentKind::BeExact => "be-exact",
            ExperimentKind::Multinomial => "multinomial",
            ExperimentKind::Ratio => "ratio",
            ExperimentKind::Difference => "difference",
            ExperimentKind::Dominance => "dominance",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Finiteness => "finiteness",
        }
    }

    /// Replicate count used when none is given.
    pub fn default_replicates(self) -> u64 {
        match self {
            ExperimentKind::HittingLaw => 100_000,
            ExperimentKind::Clt | ExperimentKind::Multinomial => 20_000,
            ExperimentKind::Ratio | ExperimentKind::Difference => 20_000,
            ExperimentKind::Lil => 200,
            ExperimentKind::BeExact => 1,
            ExperimentKind::Dominance => 1_000,
            ExperimentKind::Coverage | ExperimentKind::Finiteness => 10_000,
        }
    }

    /// Parameter names this kind reads.
    pub fn accepted_params(self) -> &'static [&'static str] {
        use ExperimentKind::*;
        match self {
            HittingLaw | Clt => &["endpoint", "k", "horizon", "per_replicate", "thresholds"],
            Lil => &[
                "endpoint",
                "k_min",
                "k_max",
                "band_low",
                "band_high",
                "per_replicate",
                "thresholds",
            ],
            BeExact => &["endpoint", "k_max", "k_list", "per_replicate", "thresholds"],
            Multinomial | Ratio | Difference => &["n", "per_replicate", "thresholds"],
            Dominance => &["n", "beta", "per_replicate", "thresholds"],
            Coverage => &["n", "u", "formula", "per_replicate", "thresholds"],
            Finiteness => &["horizon", "per_replicate", "thresholds"],
        }
    }

    /// Whether the kind needs all three outcome classes to have positive mass.
    pub fn needs_standing_assumption(self) -> bool {
        use ExperimentKind::*;
        matches!(
            self,
            Multinomial | Ratio | Difference | Dominance | Coverage
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Pass/fail rule for one scalar result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Threshold {
    AtMost { value: f64 },
    AtLeast { value: f64 },
    Within { lo: f64, hi: f64 },
}

impl Threshold {
    pub fn check(&self, x: f64) -> bool {
        match *self {
            Threshold::AtMost { value } => x <= value,
            Threshold::AtLeast { value } => x >= value,
            Threshold::Within { lo, hi } => lo <= x && x <= hi,
        }
    }

    pub fn around(center: f64, tol: f64) -> Self {
        Threshold::Within {
            lo: center - tol,
            hi: center + tol,
        }
    }

    pub fn relative(center: f64, rel: f64) -> Self {
        Threshold::around(center, center.abs() * rel)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use super::report::fmt_g9;
        match *self {
            Threshold::AtMost { value } => write!(f, "<={}", fmt_g9(value)),
            Threshold::AtLeast { value } => write!(f, ">={}", fmt_g9(value)),
            Threshold::Within { lo, hi } => write!(f, "[{},{}]", fmt_g9(lo), fmt_g9(hi)),
        }
    }
}

/// Kind-specific parameters. Absent fields take per-kind defaults during
/// normalization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<Endpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<CiFormula>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_replicate: Option<bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, Threshold>,
}

impl Params {
    /// Names of the fields that are set.
    pub fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut add = |set: bool, name| {
            if set {
                out.push(name)
            }
        };
        add(self.endpoint.is_some(), "endpoint");
        add(self.k.is_some(), "k");
        add(self.k_min.is_some(), "k_min");
        add(self.k_max.is_some(), "k_max");
        add(self.k_list.is_some(), "k_list");
        add(self.n.is_some(), "n");
        add(self.beta.is_some(), "beta");
        add(self.u.is_some(), "u");
        add(self.horizon.is_some(), "horizon");
        add(self.formula.is_some(), "formula");
        add(self.band_low.is_some(), "band_low");
        add(self.band_high.is_some(), "band_high");
        add(self.per_replicate.is_some(), "per_replicate");
        add(!self.thresholds.is_empty(), "thresholds");
        out
    }
}

/// A reproducible experiment: what to run, on which law, how many replicates,
/// from which master seed, on how many worker threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dist: DistributionSpec<f64>,
    pub params: Params,
    pub replicates: u64,
    pub master_seed: u64,
    pub workers: usize,
}

/// Threshold names each kind reports against.
fn threshold_names(kind: ExperimentKind) -> &'static [&'static str] {
    use ExperimentKind::*;
    match kind {
        HittingLaw => &["tv_distance"],
        Clt => &["ks_statistic"],
        Lil => &["in_band_fraction"],
        BeExact => &["violations", "rate_ratio"],
        Multinomial => &["cov_11", "cov_12", "cov_13", "cov_22", "cov_23", "cov_33"],
        Ratio => &["ratio_variance", "ratio_ks"],
        Difference => &["diff_variance", "diff_ks"],
        Dominance => &["dominance_frequency"],
        Coverage => &[
            "coverage",
            "coverage_corrected",
            "coverage_as_published",
            "coverage_delta_method",
            "halfwidth_ratio",
        ],
        Finiteness => &["terminated_fraction", "no_second_record_fraction"],
    }
}

fn nominal_band() -> Threshold {
    Threshold::Within { lo: 0.94, hi: 0.96 }
}

fn formula_threshold(formula: CiFormula) -> Threshold {
    match formula {
        CiFormula::Corrected | CiFormula::DeltaMethod => nominal_band(),
        CiFormula::AsPublished => Threshold::AtLeast { value: 0.999 },
    }
}

/// Whether the as-published interval is defined for this law: a binomial
/// shorthand with equal endpoint masses.
pub(crate) fn as_published_available(
    dist: &DistributionSpec<f64>,
    ep: &AtomEndpoints<f64>,
) -> bool {
    dist.binomial_r().is_some() && (ep.p1 - ep.p2).abs() <= 1e-12 * ep.p1.max(ep.p2)
}

impl ExperimentConfig {
    /// A config with every parameter at its default.
    pub fn new(kind: ExperimentKind, dist: DistributionSpec<f64>) -> Self {
        ExperimentConfig {
            kind,
            dist,
            params: Params::default(),
            replicates: kind.default_replicates(),
            master_seed: 42,
            workers: 1,
        }
    }

    pub fn endpoints(&self) -> Result<AtomEndpoints<f64>> {
        endpoints_of(&self.dist).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates the config and fills in every default, including thresholds.
    /// Idempotent.
    pub fn normalized(&self) -> Result<ExperimentConfig> {
        let kind = self.kind;
        if self.replicates < 1 {
            return config("replicates must be >= 1");
        }
        if self.workers < 1 {
            return config("workers must be >= 1");
        }
        self.dist
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let accepted = kind.accepted_params();
        if let Some(bad) = self
            .params
            .present()
            .into_iter()
            .find(|p| !accepted.contains(p))
        {
            return config(format!("parameter {bad} is not used by {kind}"));
        }
        let known = threshold_names(kind);
        if let Some(bad) = self
            .params
            .thresholds
            .keys()
            .find(|k| !known.contains(&k.as_str()))
        {
            return config(format!("unknown threshold {bad:?} for {kind}"));
        }
        let ep = self.endpoints()?;
        if kind.needs_standing_assumption() && !ep.satisfies_standing_assumption() {
            return config(format!(
                "{kind} needs positive mass at both endpoints and elsewhere, got p = ({}, {}, {})",
                ep.p1, ep.p2, ep.p3
            ));
        }

        let mut p = self.params.clone();
        let mut defaults: BTreeMap<String, Threshold> = BTreeMap::new();
        let mut set = |name: &str, t: Threshold| {
            defaults.insert(name.to_owned(), t);
        };

        let endpoint_mass = |p: &Params| -> Result<f64> {
            let e = p.endpoint.expect("endpoint defaulted");
            let mass = ep.mass(e);
            if !(mass > 0.0 && mass < 1.0) {
                return config(format!("{e} endpoint mass must lie in (0, 1), got {mass}"));
            }
            Ok(mass)
        };

        use ExperimentKind::*;
        match kind {
            HittingLaw | Clt => {
                p.endpoint.get_or_insert(Endpoint::Upper);
                let k = *p.k.get_or_insert(if kind == HittingLaw { 5 } else { 4096 });
                if k < 1 {
                    return config("k must be >= 1");
                }
                endpoint_mass(&p)?;
                if let Some(h) = p.horizon {
                    if h < k {
                        return config(format!("horizon ({h}) must be >= k ({k})"));
                    }
                }
                if kind == HittingLaw {
                    set("tv_distance", Threshold::AtMost { value: 0.02 });
                } else {
                    set("ks_statistic", Threshold::AtMost { value: 0.02 });
                }
            }
            Lil => {
                p.endpoint.get_or_insert(Endpoint::Upper);
                let k_min = *p.k_min.get_or_insert(1_000);
                let k_max = *p.k_max.get_or_insert(100_000);
                if k_min < 16 {
                    return config(format!("k_min must be >= 16 (ln ln k > 0), got {k_min}"));
                }
                if k_max < k_min {
                    return config(format!("k_max ({k_max}) must be >= k_min ({k_min})"));
                }
                let lo = *p.band_low.get_or_insert(0.2);
                let hi = *p.band_high.get_or_insert(1.5);
                if !(0.0 <= lo && lo < hi) {
                    return config(format!(
                        "band must satisfy 0 <= band_low < band_high, got [{lo}, {hi}]"
                    ));
                }
                endpoint_mass(&p)?;
                set("in_band_fraction", Threshold::AtLeast { value: 0.9 });
            }
            BeExact => {
                p.endpoint.get_or_insert(Endpoint::Upper);
                let k_max = *p.k_max.get_or_insert(200);
                let k_list = p
                    .k_list
                    .get_or_insert_with(|| vec![1 << 8, 1 << 10, 1 << 12, 1 << 14]);
                if k_max < 1 {
                    return config("k_max must be >= 1");
                }
                if let Some(&bad) = k_list
                    .iter()
                    .chain([&k_max])
                    .find(|&&k| !(1..=BE_MAX_K).contains(&k))
                {
                    return config(format!("be-exact supports 1 <= k <= {BE_MAX_K}, got {bad}"));
                }
                let two_largest = k_list.len() >= 2;
                endpoint_mass(&p)?;
                set("violations", Threshold::AtMost { value: 0.0 });
                if two_largest {
                    set("rate_ratio", Threshold::AtMost { value: 1.2 });
                }
            }
            Multinomial | Ratio | Difference => {
                let n = *p.n.get_or_insert(10_000);
                if n < 1 {
                    return config("n must be >= 1");
                }
                match kind {
                    Multinomial => {
                        let cov = multinomial_cov(ep.p_vector())
                            .map_err(|e| Error::Config(e.to_string()))?;
                        for i in 0..3 {
                            for j in i..3 {
                                set(
                                    &format!("cov_{}{}", i + 1, j + 1),
                                    Threshold::around(cov[i][j], 0.02),
                                );
                            }
                        }
                    }
                    Ratio => {
                        let law = comparison_law(ep.p1, ep.p2)
                            .map_err(|e| Error::Config(e.to_string()))?;
                        set("ratio_variance", Threshold::relative(law.gamma2, 0.10));
                        set("ratio_ks", Threshold::AtMost { value: 0.02 });
                    }
                    _ => {
                        let law = comparison_law(ep.p1, ep.p2)
                            .map_err(|e| Error::Config(e.to_string()))?;
                        set("diff_variance", Threshold::relative(law.delta2, 0.10));
                        set("diff_ks", Threshold::AtMost { value: 0.02 });
                    }
                }
            }
            Dominance => {
                let n = *p.n.get_or_insert(10_000);
                if n < 1 {
                    return config("n must be >= 1");
                }
                let gap = (ep.p1 - ep.p2).abs();
                let beta = p
                    .beta
                    .ok_or_else(|| Error::Config("dominance requires beta".into()))?;
                if !(beta > 0.0 && beta < gap) {
                    return config(format!(
                        "beta must lie in (0, |p1 - p2|) = (0, {gap}), got {beta}"
                    ));
                }
                set("dominance_frequency", Threshold::AtLeast { value: 0.999 });
            }
            Coverage => {
                let n = *p.n.get_or_insert(100_000);
                let u = *p.u.get_or_insert(0.05);
                let formula = *p.formula.get_or_insert(CiFormula::Corrected);
                if n < 1 {
                    return config("n must be >= 1");
                }
                if !(u > 0.0 && u < 1.0) {
                    return config(format!("u must lie in (0, 1), got {u}"));
                }
                let published = as_published_available(&self.dist, &ep);
                if formula == CiFormula::AsPublished && !published {
                    return config(
                        "as-published formula requires a binomial law with p1 = p2 (alpha = 1/2)",
                    );
                }
                // Companion coverage rows are reported ungated unless a
                // threshold is given for them explicitly.
                set("coverage", formula_threshold(formula));
                if published {
                    let r = self.dist.binomial_r().expect("binomial");
                    let factor = 2f64.powi(2 * r as i32 - 1);
                    set("halfwidth_ratio", Threshold::around(factor, 1e-9 * factor));
                }
            }
            Finiteness => {
                let h = *p.horizon.get_or_insert(10_000);
                if h < 1 {
                    return config("horizon must be >= 1");
                }
                set("terminated_fraction", Threshold::AtLeast { value: 0.999 });
                set("no_second_record_fraction", Threshold::around(ep.p2, 0.02));
            }
        }
        p.per_replicate.get_or_insert(false);
        for (name, t) in defaults {
            p.thresholds.entry(name).or_insert(t);
        }
        Ok(ExperimentConfig {
            kind,
            dist: self.dist.clone(),
            params: p,
            replicates: self.replicates,
            master_seed: self.master_seed,
            workers: self.workers,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
