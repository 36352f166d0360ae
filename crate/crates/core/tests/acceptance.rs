//! Acceptance suite: one block per criterion, each printing a PASS/FAIL line
//! per check. Exits nonzero when any check fails.

use std::process::ExitCode;
use std::time::Instant;

use recatom::asymptotics::CiFormula;
use recatom::distributions::geometric_moments;
use recatom::montecarlo::{
    exact_be_supdist, run_experiment, ExperimentConfig, ExperimentKind, Report, Threshold,
};
use recatom::record_engine::Endpoint;
use recatom::Distribution;

struct Tally {
    passed: usize,
    failed: Vec<String>,
}

impl Tally {
    fn check(&mut self, criterion: u32, what: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {criterion:>2} {what}: {detail}");
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(format!("criterion {criterion} {what}"));
        }
    }

    /// Checks a thresholded report row.
    fn row(&mut self, criterion: u32, report: &Report, name: &str) {
        match report.result(name) {
            Some(r) => {
                let threshold = r.threshold.map(|t| t.to_string()).unwrap_or_default();
                let se = r
                    .mc_stderr
                    .map(|s| format!(" (se {s:.3e})"))
                    .unwrap_or_default();
                self.check(
                    criterion,
                    name,
                    r.pass == Some(true),
                    format!("{:.6}{se} vs {threshold}", r.value),
                );
            }
            None => self.check(criterion, name, false, "row missing from report".into()),
        }
    }
}

fn binomial(r: u32, alpha: f64) -> Distribution {
    Distribution::binomial(r, alpha).unwrap()
}

fn run(cfg: &ExperimentConfig) -> Report {
    let started = Instant::now();
    let report = run_experiment(cfg).expect("experiment runs");
    println!(
        "     ({} in {:.1}s)",
        cfg.kind,
        started.elapsed().as_secs_f64()
    );
    report
}

fn hitting_law(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::HittingLaw, binomial(2, 0.5));
    cfg.params.endpoint = Some(Endpoint::Upper);
    cfg.params.k = Some(5);
    cfg.replicates = 100_000;
    let report = run(&cfg);
    t.row(1, &report, "tv_distance");
}

fn berry_esseen(t: &mut Tally) {
    let mut ks: Vec<u64> = (1..=200).collect();
    ks.extend([1 << 8, 1 << 10, 1 << 12, 1 << 14]);
    let started = Instant::now();
    for p in [0.25, 0.5] {
        let m = geometric_moments(p).unwrap();
        let mut violations = 0;
        let mut worst = 0.0_f64;
        let mut scaled = Vec::new();
        for &k in &ks {
            let d = exact_be_supdist(k, p).unwrap();
            let bound = recatom::asymptotics::be_bound(k, &m);
            if d > bound {
                violations += 1;
            }
            worst = worst.max(d / bound);
            if k == 1 << 12 || k == 1 << 14 {
                scaled.push(d * (k as f64).sqrt());
            }
        }
        t.check(
            2,
            &format!("p={p} violations"),
            violations == 0,
            format!(
                "{violations} of {} k values, max supdist/bound {worst:.3e}",
                ks.len()
            ),
        );
        let ratio = (scaled[0] / scaled[1]).max(scaled[1] / scaled[0]);
        t.check(
            2,
            &format!("p={p} rate ratio"),
            ratio <= 1.2,
            format!(
                "sqrt(k)*supdist {:.6} at 2^12, {:.6} at 2^14, ratio {ratio:.6} vs <=1.2",
                scaled[0], scaled[1]
            ),
        );
    }
    println!(
        "     (exact enumeration in {:.1}s)",
        started.elapsed().as_secs_f64()
    );

    // Same sweep through the runner, binomial(2, 1/2) upper endpoint (p = 0.25).
    let cfg = ExperimentConfig::new(ExperimentKind::BeExact, binomial(2, 0.5));
    let report = run(&cfg);
    t.row(2, &report, "violations");
    t.row(2, &report, "rate_ratio");
}

fn clt(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Clt, binomial(2, 0.5));
    cfg.params.endpoint = Some(Endpoint::Upper);
    cfg.params.k = Some(4096);
    cfg.replicates = 20_000;
    let report = run(&cfg);
    t.row(3, &report, "ks_statistic");
}

fn lil(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Lil, binomial(1, 0.5));
    cfg.params.endpoint = Some(Endpoint::Upper);
    cfg.params.k_min = Some(1_000);
    cfg.params.k_max = Some(100_000);
    cfg.params.band_low = Some(0.2);
    cfg.params.band_high = Some(1.5);
    cfg.replicates = 200;
    let report = run(&cfg);
    t.row(4, &report, "in_band_fraction");
}

fn comparison(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, binomial(2, 0.5));
    cfg.params.n = Some(10_000);
    cfg.replicates = 20_000;
    cfg
}

fn multinomial(t: &mut Tally) {
    let report = run(&comparison(ExperimentKind::Multinomial));
    for name in ["cov_11", "cov_12", "cov_13", "cov_22", "cov_23", "cov_33"] {
        t.row(5, &report, name);
    }
}

fn ratio(t: &mut Tally) {
    let report = run(&comparison(ExperimentKind::Ratio));
    t.row(6, &report, "ratio_variance");
    t.row(6, &report, "ratio_ks");
    for name in [
        "gamma2",
        "ratio_variance_delta_method",
        "ratio_ks_delta_method",
    ] {
        println!("     info {name} = {:.6}", report.value(name).unwrap());
    }
}

fn dominance(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Dominance, binomial(2, 0.7));
    cfg.params.n = Some(10_000);
    cfg.params.beta = Some(0.2);
    cfg.params.per_replicate = Some(true);
    cfg.replicates = 1_000;
    let report = run(&cfg);
    t.row(7, &report, "dominance_frequency");
    // Strict form M2 - M1 > n*beta from the per-replicate counts.
    let table = report.table.as_ref().expect("per-replicate table");
    let n_beta = 10_000.0 * 0.2;
    let strict = table.rows.iter().filter(|r| r[2] - r[1] > n_beta).count();
    let freq = strict as f64 / table.rows.len() as f64;
    t.check(
        7,
        "strict dominance frequency",
        freq >= 0.999,
        format!("{freq:.6} vs >=0.999"),
    );
}

fn coverage(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Coverage, binomial(2, 0.5));
    cfg.params.n = Some(100_000);
    cfg.params.u = Some(0.05);
    cfg.params.formula = Some(CiFormula::Corrected);
    cfg.params.thresholds.insert(
        "coverage_as_published".into(),
        Threshold::AtLeast { value: 0.999 },
    );
    cfg.replicates = 10_000;
    let report = run(&cfg);
    t.row(8, &report, "coverage");
    t.row(8, &report, "coverage_as_published");
    t.row(8, &report, "halfwidth_ratio");
    for name in [
        "coverage_delta_method",
        "halfwidth_corrected",
        "halfwidth_as_published",
    ] {
        println!("     info {name} = {:.6}", report.value(name).unwrap());
    }
}

fn finiteness(t: &mut Tally) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Finiteness, binomial(2, 0.5));
    cfg.params.horizon = Some(10_000);
    cfg.replicates = 10_000;
    let report = run(&cfg);
    t.row(9, &report, "terminated_fraction");
    t.row(9, &report, "no_second_record_fraction");
}

fn reproducibility(t: &mut Tally) {
    let mut configs = Vec::new();
    for kind in ExperimentKind::ALL {
        let dist = match kind {
            ExperimentKind::Dominance => binomial(2, 0.7),
            _ => binomial(2, 0.5),
        };
        let mut cfg = ExperimentConfig::new(kind, dist);
        cfg.master_seed = 20_240_601;
        cfg.replicates = match kind {
            ExperimentKind::BeExact => 1,
            ExperimentKind::Lil => 16,
            _ => 2_000,
        };
        match kind {
            ExperimentKind::Dominance => cfg.params.beta = Some(0.2),
            ExperimentKind::Coverage
            | ExperimentKind::Ratio
            | ExperimentKind::Difference
            | ExperimentKind::Multinomial => cfg.params.n = Some(2_000),
            ExperimentKind::BeExact => cfg.params.k_list = Some(vec![256, 1024]),
            _ => {}
        }
        configs.push(cfg);
    }
    for cfg in configs {
        let csv = |workers: usize| {
            let mut c = cfg.clone();
            c.workers = workers;
            run_experiment(&c).unwrap().to_csv().unwrap()
        };
        let (one, eight) = (csv(1), csv(8));
        t.check(
            10,
            &format!("{} workers=1 vs workers=8", cfg.kind),
            one == eight,
            format!(
                "{} bytes, {}",
                one.len(),
                if one == eight { "identical" } else { "differ" }
            ),
        );
    }
}

fn main() -> ExitCode {
    let mut t = Tally {
        passed: 0,
        failed: Vec::new(),
    };
    let started = Instant::now();
    hitting_law(&mut t);
    berry_esseen(&mut t);
    clt(&mut t);
    lil(&mut t);
    multinomial(&mut t);
    ratio(&mut t);
    dominance(&mut t);
    coverage(&mut t);
    finiteness(&mut t);
    reproducibility(&mut t);
    println!(
        "acceptance: {} passed, {} failed in {:.1}s",
        t.passed,
        t.failed.len(),
        started.elapsed().as_secs_f64()
    );
    if t.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &t.failed {
            println!("  failed: {f}");
        }
        ExitCode::FAILURE
    }
}
