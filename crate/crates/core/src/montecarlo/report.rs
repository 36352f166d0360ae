//! Experiment reports and their CSV/JSON forms.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, Params, Threshold};
use crate::distributions::DistributionSpec;
use crate::error::Result;

/// Renders `x` with 9 significant digits, trailing zeros trimmed (C's `%.9g`).
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The config as echoed in a report: everything except the worker count,
/// which must not influence results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub kind: ExperimentKind,
    pub dist: DistributionSpec<f64>,
    pub params: Params,
    pub replicates: u64,
    pub master_seed: u64,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigEcho {
            kind: c.kind,
            dist: c.dist.clone(),
            params: c.params.clone(),
            replicates: c.replicates,
            master_seed: c.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarResult {
    pub name: String,
    /// How the value was obtained.
    pub estimator: String,
    pub value: f64,
    pub mc_stderr: Option<f64>,
    pub threshold: Option<Threshold>,
    /// `None` for informational rows without a threshold.
    pub pass: Option<bool>,
}

/// Per-replicate values, one row per replicate, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub results: Vec<ScalarResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub table: Option<ReplicateTable>,
    pub passed: bool,
    pub duration_secs: f64,
}

pub const CSV_HEADER: [&str; 5] = ["name", "value", "mc_stderr", "threshold", "pass"];

impl Report {
    pub fn result(&self, name: &str) -> Option<&ScalarResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.result(name).map(|r| r.value)
    }

    /// Names of thresholded results that failed.
    pub fn failures(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|r| r.pass == Some(false))
            .map(|r| r.name.as_str())
            .collect()
    }

    /// One row per scalar result. Contains nothing run-dependent, so equal
    /// configs give byte-identical output.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.results {
            w.write_record([
                r.name.clone(),
                fmt_g9(r.value),
                r.mc_stderr.map(fmt_g9).unwrap_or_default(),
                r.threshold.map(|t| t.to_string()).unwrap_or_default(),
                match r.pass {
                    Some(true) => "pass".to_owned(),
                    Some(false) => "fail".to_owned(),
                    None => String::new(),
                },
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn table_csv(&self) -> Result<Option<String>> {
        let Some(table) = &self.table else {
            return Ok(None);
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|&x| fmt_g9(x)))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(Some(String::from_utf8(bytes).expect("csv output is utf-8")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
