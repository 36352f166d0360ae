//! Command-line front end: argument parsing, config resolution and report emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use serde::Deserialize;

use crate::asymptotics::CiFormula;
use crate::distributions::DistributionSpec;
use crate::error::Error;
use crate::montecarlo::{run_experiment, ExperimentConfig, ExperimentKind, Params, Report};
use crate::record_engine::Endpoint;

/// Environment variable that overrides every other seed source.
pub const SEED_ENV: &str = "RECATOM_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_THRESHOLD_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// A failure carrying the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Domain(_)
            | Error::NoDistinctEndpoints
            | Error::Parse { .. } => CliError::config(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Run(ExperimentKind),
    ValidateConfig,
    Version,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Run(kind) => kind.as_str(),
            Subcommand::ValidateConfig => "validate-config",
            Subcommand::Version => "version",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Both => "both",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(format!("expected csv, json or both, got {s:?}")),
        }
    }
}

/// A parsed command line. `flags` holds the experiment flags that were given,
/// keyed by long name without the leading dashes, in canonical string form.
#[derive(Debug, Clone, PartialEq)]
pub struct CliInvocation {
    pub subcommand: Subcommand,
    pub flags: BTreeMap<String, String>,
    pub config_path: Option<PathBuf>,
    pub output: OutputFormat,
    pub out_path: Option<PathBuf>,
}

/// Experiment flags, in rendering order. Values are validated by clap.
const VALUE_FLAGS: [&str; 16] = [
    "dist",
    "reps",
    "seed",
    "workers",
    "k",
    "k-min",
    "k-max",
    "k-list",
    "n",
    "horizon",
    "beta",
    "u",
    "endpoint",
    "formula",
    "band-low",
    "band-high",
];

fn experiment_args() -> Vec<Arg> {
    let u64_flag = |name: &'static str, help: &'static str| {
        Arg::new(name)
            .long(name)
            .value_name("INT")
            .value_parser(value_parser!(u64))
            .help(help)
    };
    let f64_flag = |name: &'static str, help: &'static str| {
        Arg::new(name)
            .long(name)
            .value_name("FLOAT")
            .value_parser(value_parser!(f64))
            .help(help)
    };
    vec![
        Arg::new("dist")
            .long("dist")
            .value_name("SPEC")
            .help("binomial:r=<int>,alpha=<float> or table:<path to support,prob CSV>"),
        u64_flag("reps", "number of replicates"),
        u64_flag("seed", "master seed (overridden by RECATOM_SEED)"),
        Arg::new("workers")
            .long("workers")
            .value_name("INT")
            .value_parser(value_parser!(usize))
            .help("worker threads; results do not depend on it"),
        Arg::new("output")
            .long("output")
            .value_name("FORMAT")
            .value_parser(["csv", "json", "both"])
            .help("report format"),
        Arg::new("out")
            .long("out")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .help("output file; standard output when absent"),
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .help("JSON config file; flags override its values"),
        u64_flag("k", "hit index"),
        u64_flag("k-min", "smallest k inspected by lil"),
        u64_flag("k-max", "largest k"),
        Arg::new("k-list")
            .long("k-list")
            .value_name("INT,...")
            .value_delimiter(',')
            .value_parser(value_parser!(u64))
            .help("extra k values for be-exact"),
        u64_flag("n", "observations per replicate"),
        u64_flag("horizon", "observation cap per replicate"),
        f64_flag("beta", "dominance margin"),
        f64_flag("u", "interval level is 1-u"),
        Arg::new("endpoint")
            .long("endpoint")
            .value_parser(["lower", "upper", "neither"])
            .help("which endpoint the hitting process counts"),
        Arg::new("formula")
            .long("formula")
            .value_parser(["corrected", "as-published", "delta-method"])
            .help("ratio interval formula"),
        f64_flag("band-low", "lower edge of the lil band"),
        f64_flag("band-high", "upper edge of the lil band"),
        Arg::new("per-replicate")
            .long("per-replicate")
            .action(ArgAction::SetTrue)
            .help("also write the per-replicate table"),
    ]
}

fn command() -> Command {
    let mut cmd = Command::new("recatom")
        .about("Record processes of discrete laws with atoms at both endpoints")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for kind in ExperimentKind::ALL {
        cmd = cmd.subcommand(Command::new(kind.as_str()).args(experiment_args()));
    }
    cmd.subcommand(
        Command::new("validate-config")
            .about("resolve and print the effective config without running it")
            .args(experiment_args()),
    )
    .subcommand(Command::new("version").about("print the version"))
}

/// Usage text for the whole tool.
pub fn usage() -> String {
    command().render_help().to_string()
}

fn flag_value(m: &ArgMatches, name: &str) -> Option<String> {
    match name {
        "reps" | "seed" | "k" | "k-min" | "k-max" | "n" | "horizon" => {
            m.get_one::<u64>(name).map(u64::to_string)
        }
        "workers" => m.get_one::<usize>(name).map(usize::to_string),
        "beta" | "u" | "band-low" | "band-high" => m.get_one::<f64>(name).map(f64::to_string),
        "k-list" => m
            .get_many::<u64>(name)
            .map(|vs| vs.map(u64::to_string).collect::<Vec<_>>().join(",")),
        _ => m.get_one::<String>(name).cloned(),
    }
}

/// Parses `argv` (without the program name).
pub fn parse_invocation<S: AsRef<str>>(argv: &[S]) -> Result<CliInvocation, CliError> {
    let full = std::iter::once("recatom").chain(argv.iter().map(AsRef::as_ref));
    let matches = command().try_get_matches_from(full).map_err(|e| {
        let code = if e.use_stderr() {
            EXIT_USAGE
        } else {
            EXIT_PASS
        };
        CliError {
            code,
            message: e.render().to_string(),
        }
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let subcommand = match name {
        "validate-config" => Subcommand::ValidateConfig,
        "version" => Subcommand::Version,
        other => Subcommand::Run(
            other
                .parse()
                .map_err(|e: Error| CliError::usage(e.to_string()))?,
        ),
    };
    let mut inv = CliInvocation {
        subcommand,
        flags: BTreeMap::new(),
        config_path: None,
        output: OutputFormat::default(),
        out_path: None,
    };
    if subcommand == Subcommand::Version {
        return Ok(inv);
    }
    for name in VALUE_FLAGS {
        if let Some(v) = flag_value(sub, name) {
            inv.flags.insert(name.to_owned(), v);
        }
    }
    if sub.get_flag("per-replicate") {
        inv.flags
            .insert("per-replicate".to_owned(), "true".to_owned());
    }
    inv.config_path = sub.get_one::<PathBuf>("config").cloned();
    inv.out_path = sub.get_one::<PathBuf>("out").cloned();
    if let Some(o) = sub.get_one::<String>("output") {
        inv.output = o.parse().map_err(CliError::usage)?;
    }
    Ok(inv)
}

impl CliInvocation {
    /// Argument vector that parses back to this invocation.
    pub fn to_argv(&self) -> Vec<String> {
        let mut argv = vec![self.subcommand.as_str().to_owned()];
        for name in VALUE_FLAGS {
            if let Some(v) = self.flags.get(name) {
                argv.push(format!("--{name}"));
                argv.push(v.clone());
            }
        }
        if self.flags.contains_key("per-replicate") {
            argv.push("--per-replicate".to_owned());
        }
        if let Some(p) = &self.config_path {
            argv.push("--config".to_owned());
            argv.push(p.display().to_string());
        }
        if self.output != OutputFormat::default() {
            argv.push("--output".to_owned());
            argv.push(self.output.as_str().to_owned());
        }
        if let Some(p) = &self.out_path {
            argv.push("--out".to_owned());
            argv.push(p.display().to_string());
        }
        argv
    }

    /// Space-separated command line, for logs.
    pub fn render(&self) -> String {
        self.to_argv().join(" ")
    }
}

/// Parses the `--dist` mini-grammar.
pub fn parse_dist(s: &str) -> Result<DistributionSpec<f64>, CliError> {
    let bad = |why: &str| CliError::config(format!("bad --dist {s:?}: {why}"));
    if let Some(path) = s.strip_prefix("table:") {
        if path.is_empty() {
            return Err(bad("missing path"));
        }
        return DistributionSpec::from_table_csv(Path::new(path))
            .map_err(|e| CliError::config(e.to_string()));
    }
    let body = s
        .strip_prefix("binomial:")
        .ok_or_else(|| bad("expected binomial:r=<int>,alpha=<float> or table:<path>"))?;
    let (mut r, mut alpha) = (None, None);
    for part in body.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| bad("expected key=value"))?;
        match key.trim() {
            "r" => {
                let v: i64 = value
                    .trim()
                    .parse()
                    .map_err(|_| bad("r must be an integer"))?;
                if v < 1 || v > i64::from(u32::MAX) {
                    return Err(bad(&format!("r={v} must be >= 1")));
                }
                r = Some(v as u32);
            }
            "alpha" => {
                alpha = Some(
                    value
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| bad("alpha must be a number"))?,
                )
            }
            other => return Err(bad(&format!("unknown key {other:?}"))),
        }
    }
    let r = r.ok_or_else(|| bad("missing r"))?;
    let alpha = alpha.ok_or_else(|| bad("missing alpha"))?;
    DistributionSpec::binomial(r, alpha).map_err(CliError::from)
}

/// Config file contents. Every field is optional; flags fill or override them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kind: Option<ExperimentKind>,
    dist: Option<DistributionSpec<f64>>,
    #[serde(default)]
    params: Params,
    replicates: Option<u64>,
    master_seed: Option<u64>,
    workers: Option<usize>,
}

fn default_dist() -> DistributionSpec<f64> {
    DistributionSpec::binomial(2, 0.5).expect("valid law")
}

fn parsed<T: FromStr>(flags: &BTreeMap<String, String>, name: &str) -> Result<Option<T>, CliError> {
    flags
        .get(name)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::usage(format!("invalid value {v:?} for --{name}")))
        })
        .transpose()
}

/// Builds the normalized experiment config: config file, then flags, then the
/// seed environment variable (`env_seed`).
pub fn resolve_config(
    inv: &CliInvocation,
    env_seed: Option<&str>,
) -> Result<ExperimentConfig, CliError> {
    let file = match &inv.config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let kind = match (inv.subcommand, file.kind) {
        (Subcommand::Run(k), Some(f)) if k != f => {
            return Err(CliError::config(format!(
                "subcommand {k} conflicts with config kind {f}"
            )))
        }
        (Subcommand::Run(k), _) => k,
        (Subcommand::ValidateConfig, Some(f)) => f,
        (Subcommand::ValidateConfig, None) => {
            return Err(CliError::config(
                "validate-config needs a config file with a kind",
            ))
        }
        (Subcommand::Version, _) => return Err(CliError::usage("version takes no config")),
    };
    let flags = &inv.flags;
    let dist = match (flags.get("dist"), file.dist) {
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "distribution given both by --dist and by the config file",
            ))
        }
        (Some(s), None) => parse_dist(s)?,
        (None, Some(d)) => d,
        (None, None) => default_dist(),
    };

    let mut cfg = ExperimentConfig::new(kind, dist);
    cfg.params = file.params;
    if let Some(r) = file.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = file.master_seed {
        cfg.master_seed = s;
    }
    if let Some(w) = file.workers {
        cfg.workers = w;
    }

    let p = &mut cfg.params;
    macro_rules! set {
        ($field:ident, $flag:literal) => {
            if let Some(v) = parsed(flags, $flag)? {
                p.$field = Some(v);
            }
        };
    }
    set!(k, "k");
    set!(k_min, "k-min");
    set!(k_max, "k-max");
    set!(n, "n");
    set!(horizon, "horizon");
    set!(beta, "beta");
    set!(u, "u");
    set!(band_low, "band-low");
    set!(band_high, "band-high");
    if let Some(e) = flags.get("endpoint") {
        p.endpoint = Some(
            e.parse::<Endpoint>()
                .map_err(|e| CliError::usage(e.to_string()))?,
        );
    }
    if let Some(f) = flags.get("formula") {
        p.formula = Some(
            f.parse::<CiFormula>()
                .map_err(|e| CliError::usage(e.to_string()))?,
        );
    }
    if let Some(list) = flags.get("k-list") {
        let ks = list
            .split(',')
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::usage(format!("invalid value {v:?} for --k-list")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        p.k_list = Some(ks);
    }
    if flags.contains_key("per-replicate") {
        p.per_replicate = Some(true);
    }
    if let Some(r) = parsed(flags, "reps")? {
        cfg.replicates = r;
    }
    if let Some(s) = parsed(flags, "seed")? {
        cfg.master_seed = s;
    }
    if let Some(w) = parsed(flags, "workers")? {
        cfg.workers = w;
    }
    if let Some(s) = env_seed {
        cfg.master_seed = s.trim().parse().map_err(|_| {
            CliError::config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
        })?;
    }
    cfg.normalized().map_err(CliError::from)
}

/// Writes to standard output; a closed pipe (`| head`) is not an error.
fn write_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::runtime(format!(
            "cannot write standard output: {e}"
        ))),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes the report as requested and returns the exit status: 0 when every
/// threshold passes, 1 otherwise, 4 when output cannot be written.
pub fn emit_report(report: &Report, inv: &CliInvocation) -> i32 {
    match write_report(report, inv) {
        Ok(()) if report.passed => EXIT_PASS,
        Ok(()) => EXIT_THRESHOLD_FAILED,
        Err(e) => {
            eprintln!("recatom: {e}");
            e.code
        }
    }
}

fn write_report(report: &Report, inv: &CliInvocation) -> Result<(), CliError> {
    let csv = report.to_csv().map_err(CliError::from)?;
    let json = report.to_json();
    match &inv.out_path {
        None => match inv.output {
            OutputFormat::Csv => write_stdout(&csv)?,
            OutputFormat::Json => write_stdout(&json)?,
            OutputFormat::Both => write_stdout(&format!("{csv}{json}"))?,
        },
        Some(path) => {
            match inv.output {
                OutputFormat::Csv => write_file(path, &csv)?,
                OutputFormat::Json => write_file(path, &json)?,
                OutputFormat::Both => {
                    write_file(&path.with_extension("csv"), &csv)?;
                    write_file(&path.with_extension("json"), &json)?;
                }
            }
            if let Some(table) = report.table_csv().map_err(CliError::from)? {
                write_file(&replicate_table_path(path), &table)?;
            }
        }
    }
    Ok(())
}

/// Where the per-replicate table goes for a given report path.
pub fn replicate_table_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.replicates.csv"))
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with_args<S: AsRef<str>>(argv: &[S], env_seed: Option<&str>) -> i32 {
    let inv = match parse_invocation(argv) {
        Ok(inv) => inv,
        Err(e) => {
            if e.code == EXIT_PASS {
                let _ = write_stdout(&e.message);
            } else {
                eprint!("{e}");
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            return e.code;
        }
    };
    let run = || -> Result<i32, CliError> {
        match inv.subcommand {
            Subcommand::Version => {
                write_stdout(&format!("recatom {}\n", env!("CARGO_PKG_VERSION")))?;
                Ok(EXIT_PASS)
            }
            Subcommand::ValidateConfig => {
                let cfg = resolve_config(&inv, env_seed)?;
                write_stdout(&format!("{}\n", cfg.to_json()))?;
                Ok(EXIT_PASS)
            }
            Subcommand::Run(_) => {
                let cfg = resolve_config(&inv, env_seed)?;
                let report = run_experiment(&cfg).map_err(CliError::from)?;
                Ok(emit_report(&report, &inv))
            }
        }
    };
    run().unwrap_or_else(|e| {
        eprintln!("recatom: {e}");
        e.code
    })
}
