//! Dispatches an [`ExperimentConfig`] to its experiment and assembles the report.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::be_exact::exact_be_supdist;
use super::config::{as_published_available, ExperimentConfig, ExperimentKind, Threshold};
use super::estimators::{
    covariance_se, coverage_estimate, empirical_pmf, ks_statistic, mean_se, proportion_se,
    tv_distance, variance_se,
};
use super::report::{ConfigEcho, ReplicateTable, Report, ScalarResult};
use super::seed::run_replicates;
use crate::asymptotics::{
    be_bound, clt_standardize, comparison_law, diff_stat, dominance_holds, lil_envelope,
    multinomial_standardize, ratio_ci, ratio_ci_halfwidth, ratio_stat, CiFormula, Interval,
};
use crate::distributions::{gaussian_cdf, geometric_moments, multinomial_cov, nb_pmf};
use crate::error::{Error, Result};
use crate::record_engine::{run_record_trace, AtomEndpoints, OutcomeSampler};

/// Accumulates scalar results, evaluating each against its declared threshold.
struct Results<'a> {
    thresholds: &'a BTreeMap<String, Threshold>,
    rows: Vec<ScalarResult>,
}

impl<'a> Results<'a> {
    fn push(&mut self, name: &str, estimator: &str, value: f64, mc_stderr: Option<f64>) {
        let threshold = self.thresholds.get(name).copied();
        self.rows.push(ScalarResult {
            name: name.to_owned(),
            estimator: estimator.to_owned(),
            value,
            mc_stderr,
            threshold,
            pass: threshold.map(|t| t.check(value)),
        });
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    ep: AtomEndpoints<f64>,
    outcomes: OutcomeSampler,
    keep_table: bool,
}

impl Ctx<'_> {
    fn replicates<R: Send>(
        &self,
        f: impl Fn(&mut rand_chacha::ChaCha8Rng) -> R + Sync,
    ) -> Result<Vec<R>> {
        run_replicates(
            self.cfg.replicates,
            self.cfg.master_seed,
            self.cfg.workers,
            |_, rng| f(rng),
        )
    }

    fn table(
        &self,
        columns: &[&str],
        rows: impl FnOnce() -> Vec<Vec<f64>>,
    ) -> Option<ReplicateTable> {
        self.keep_table.then(|| ReplicateTable {
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: rows(),
        })
    }
}

/// Runs the experiment described by `cfg`.
///
/// The report, apart from `duration_secs`, depends only on the config minus
/// its worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let cfg = cfg.normalized()?;
    let started = Instant::now();
    let ep = cfg.endpoints()?;
    let outcomes = OutcomeSampler::new(&cfg.dist.sampler())?;
    let ctx = Ctx {
        cfg: &cfg,
        ep,
        outcomes,
        keep_table: cfg.params.per_replicate.unwrap_or(false),
    };
    let mut out = Results {
        thresholds: &cfg.params.thresholds,
        rows: Vec::new(),
    };
    let table = match cfg.kind {
        ExperimentKind::HittingLaw => hitting_law(&ctx, &mut out)?,
        ExperimentKind::Clt => clt(&ctx, &mut out)?,
        ExperimentKind::Lil => lil(&ctx, &mut out)?,
        ExperimentKind::BeExact => be_exact(&ctx, &mut out)?,
        ExperimentKind::Multinomial => multinomial(&ctx, &mut out)?,
        ExperimentKind::Ratio => ratio(&ctx, &mut out)?,
        ExperimentKind::Difference => difference(&ctx, &mut out)?,
        ExperimentKind::Dominance => dominance(&ctx, &mut out)?,
        ExperimentKind::Coverage => coverage(&ctx, &mut out)?,
        ExperimentKind::Finiteness => finiteness(&ctx, &mut out)?,
    };
    let passed = out.rows.iter().all(|r| r.pass != Some(false));
    Ok(Report {
        config: ConfigEcho::from(&cfg),
        results: out.rows,
        table,
        passed,
        duration_secs: started.elapsed().as_secs_f64(),
    })
}

/// k-th hit times of the configured endpoint, `None` where the horizon ran out.
fn kth_hits(ctx: &Ctx) -> Result<(Vec<Option<u64>>, f64)> {
    let p = &ctx.cfg.params;
    let endpoint = p.endpoint.expect("normalized");
    let k = p.k.expect("normalized");
    let cap = p.horizon.unwrap_or(u64::MAX);
    let hits = ctx.replicates(|rng| ctx.outcomes.kth_hit(endpoint, k, cap, rng))?;
    Ok((hits, ctx.ep.mass(endpoint)))
}

fn completed(hits: &[Option<u64>]) -> Result<Vec<u64>> {
    let done: Vec<u64> = hits.iter().flatten().copied().collect();
    if done.is_empty() {
        return Err(Error::Runtime(
            "no replicate reached the k-th hit within the horizon".into(),
        ));
    }
    Ok(done)
}

fn hit_table(hits: &[Option<u64>]) -> Vec<Vec<f64>> {
    hits.iter()
        .enumerate()
        .map(|(i, h)| vec![i as f64, h.map_or(f64::NAN, |n| n as f64)])
        .collect()
}

fn hitting_law(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let (hits, p) = kth_hits(ctx)?;
    let k = ctx.cfg.params.k.expect("normalized");
    let done = completed(&hits)?;
    let empirical = empirical_pmf(&done);

    // Exact law on [k, n_hi]; beyond n_hi the mass is negligible.
    let kf = k as f64;
    let tail_end = (kf / p + 50.0 * kf.sqrt() / p).ceil() as u64;
    let n_hi = tail_end.max(*empirical.keys().last().expect("nonempty"));
    let exact = (k..=n_hi)
        .map(|n| nb_pmf(k, p, n).map(|f| (n, f)))
        .collect::<Result<BTreeMap<u64, f64>>>()?;

    out.push(
        "tv_distance",
        "half L1 distance, empirical vs exact negative binomial pmf",
        tv_distance(&empirical, &exact),
        None,
    );
    let samples: Vec<f64> = done.iter().map(|&n| n as f64).collect();
    let (mean, se) = mean_se(&samples);
    out.push("mean_hitting_time", "sample mean", mean, Some(se));
    out.push("expected_hitting_time", "exact k/p", kf / p, None);
    out.push(
        "exhausted_replicates",
        "count",
        (hits.len() - done.len()) as f64,
        None,
    );
    Ok(ctx.table(&["replicate", "n_k"], || hit_table(&hits)))
}

fn clt(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let (hits, p) = kth_hits(ctx)?;
    let k = ctx.cfg.params.k.expect("normalized");
    let m = geometric_moments(p)?;
    let z: Vec<f64> = completed(&hits)?
        .into_iter()
        .map(|n| clt_standardize(n, k, &m))
        .collect();
    out.push(
        "ks_statistic",
        "Kolmogorov-Smirnov distance of standardized N_k to the standard normal",
        ks_statistic(&z, gaussian_cdf)?,
        None,
    );
    let (mean, se) = mean_se(&z);
    out.push("standardized_mean", "sample mean", mean, Some(se));
    let (var, vse) = variance_se(&z);
    out.push("standardized_variance", "sample variance", var, Some(vse));
    out.push(
        "exhausted_replicates",
        "count",
        (hits.len() - z.len()) as f64,
        None,
    );
    Ok(ctx.table(&["replicate", "n_k"], || hit_table(&hits)))
}

fn lil(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let params = &ctx.cfg.params;
    let endpoint = params.endpoint.expect("normalized");
    let (k_min, k_max) = (
        params.k_min.expect("normalized"),
        params.k_max.expect("normalized"),
    );
    let (lo, hi) = (
        params.band_low.expect("normalized"),
        params.band_high.expect("normalized"),
    );
    let m = geometric_moments(ctx.ep.mass(endpoint))?;

    // Per path only the running maximum of the normalized deviation is kept.
    let maxima = ctx
        .replicates(|rng| -> Result<f64> {
            let mut hits = 0u64;
            let mut t = 0u64;
            let mut max_dev = 0.0_f64;
            while hits < k_max {
                t += 1;
                if endpoint.matches(ctx.outcomes.sample(rng)) {
                    hits += 1;
                    if hits >= k_min {
                        let dev =
                            (t as f64 - hits as f64 * m.nu).abs() / lil_envelope(hits, &m, 1.0)?;
                        max_dev = max_dev.max(dev);
                    }
                }
            }
            Ok(max_dev)
        })?
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let inside = maxima.iter().filter(|&&d| lo <= d && d <= hi).count();
    let frac = inside as f64 / maxima.len() as f64;
    out.push(
        "in_band_fraction",
        "fraction of paths whose maximal normalized deviation lies in the band",
        frac,
        Some(proportion_se(frac, maxima.len())),
    );
    let (mean, se) = mean_se(&maxima);
    out.push("max_deviation_mean", "sample mean", mean, Some(se));
    let mut sorted = maxima.clone();
    sorted.sort_by(f64::total_cmp);
    out.push(
        "max_deviation_median",
        "sample median",
        sorted[sorted.len() / 2],
        None,
    );
    out.push("max_deviation_min", "sample minimum", sorted[0], None);
    out.push(
        "max_deviation_max",
        "sample maximum",
        sorted[sorted.len() - 1],
        None,
    );
    Ok(ctx.table(&["replicate", "max_deviation"], || {
        maxima
            .iter()
            .enumerate()
            .map(|(i, &d)| vec![i as f64, d])
            .collect()
    }))
}

fn be_exact(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let params = &ctx.cfg.params;
    let p = ctx.ep.mass(params.endpoint.expect("normalized"));
    let m = geometric_moments(p)?;
    let mut list = params.k_list.clone().expect("normalized");
    list.sort_unstable();
    list.dedup();
    let mut ks: Vec<u64> = (1..=params.k_max.expect("normalized"))
        .chain(list.iter().copied())
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.workers)
        .build()
        .map_err(|e| Error::Runtime(e.to_string()))?;
    let dists: Vec<f64> = pool.install(|| {
        ks.par_iter()
            .map(|&k| exact_be_supdist(k, p))
            .collect::<Result<Vec<f64>>>()
    })?;
    let bounds: Vec<f64> = ks.iter().map(|&k| be_bound(k, &m)).collect();

    let violations = dists.iter().zip(&bounds).filter(|(d, b)| d > b).count();
    out.push(
        "violations",
        "count of k with exact sup-distance above 36*gamma/sqrt(k)",
        violations as f64,
        None,
    );
    let worst = dists
        .iter()
        .zip(&bounds)
        .map(|(d, b)| d / b)
        .fold(0.0_f64, f64::max);
    out.push(
        "max_supdist_over_bound",
        "max over k of exact sup-distance / bound",
        worst,
        None,
    );
    let scaled = |k: u64| {
        let i = ks.binary_search(&k).expect("k enumerated");
        dists[i] * (k as f64).sqrt()
    };
    for &k in &list {
        let i = ks.binary_search(&k).expect("k enumerated");
        out.push(
            &format!("supdist_k{k}"),
            "exact enumeration",
            dists[i],
            None,
        );
        out.push(
            &format!("scaled_supdist_k{k}"),
            "exact sup-distance times sqrt(k)",
            scaled(k),
            None,
        );
    }
    if list.len() >= 2 {
        let a = scaled(list[list.len() - 1]);
        let b = scaled(list[list.len() - 2]);
        out.push(
            "rate_ratio",
            "max ratio of sqrt(k)-scaled sup-distances at the two largest listed k",
            (a / b).max(b / a),
            None,
        );
    }
    Ok(ctx.table(&["k", "supdist", "bound"], || {
        ks.iter()
            .zip(dists.iter().zip(&bounds))
            .map(|(&k, (&d, &b))| vec![k as f64, d, b])
            .collect()
    }))
}

fn n_param(ctx: &Ctx) -> u64 {
    ctx.cfg.params.n.expect("normalized")
}

fn multinomial(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let n = n_param(ctx);
    let p = ctx.ep.p_vector();
    let z: Vec<[f64; 3]> =
        ctx.replicates(|rng| multinomial_standardize(&ctx.outcomes.counts(n, rng), p))?;
    let sigma = multinomial_cov(p)?;
    for i in 0..3 {
        for j in i..3 {
            let (c, se) = covariance_se(&z, i, j);
            out.push(
                &format!("cov_{}{}", i + 1, j + 1),
                "sample covariance of standardized counts",
                c,
                Some(se),
            );
        }
    }
    for i in 0..3 {
        for j in i..3 {
            out.push(
                &format!("sigma_{}{}", i + 1, j + 1),
                "exact limit covariance",
                sigma[i][j],
                None,
            );
        }
    }
    Ok(ctx.table(&["replicate", "z1", "z2", "z3"], || {
        z.iter()
            .enumerate()
            .map(|(i, v)| vec![i as f64, v[0], v[1], v[2]])
            .collect()
    }))
}

fn ratio(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let n = n_param(ctx);
    let ep = ctx.ep;
    let stats: Vec<Option<f64>> =
        ctx.replicates(|rng| ratio_stat(&ctx.outcomes.counts(n, rng), &ep).ok())?;
    let defined: Vec<f64> = stats.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Runtime("ratio undefined in every replicate".into()));
    }
    let law = comparison_law(ep.p1, ep.p2)?;
    let (var, se) = variance_se(&defined);
    out.push(
        "ratio_variance",
        "sample variance of sqrt(n)(M1/M2 - p1/p2)",
        var,
        Some(se),
    );
    let sd = law.gamma2.sqrt();
    let std: Vec<f64> = defined.iter().map(|x| x / sd).collect();
    out.push(
        "ratio_ks",
        "Kolmogorov-Smirnov distance of the statistic over sqrt(gamma2) to the standard normal",
        ks_statistic(&std, gaussian_cdf)?,
        None,
    );
    out.push("gamma2", "published asymptotic variance", law.gamma2, None);
    out.push(
        "ratio_variance_delta_method",
        "delta-method asymptotic variance p1(p1+p2)/p2^3",
        law.ratio_variance,
        None,
    );
    let sd_dm = law.ratio_variance.sqrt();
    let std_dm: Vec<f64> = defined.iter().map(|x| x / sd_dm).collect();
    out.push("ratio_ks_delta_method", "Kolmogorov-Smirnov distance of the statistic over the delta-method sd to the standard normal", ks_statistic(&std_dm, gaussian_cdf)?, None);
    out.push(
        "undefined_replicates",
        "count with M2 = 0",
        (stats.len() - defined.len()) as f64,
        None,
    );
    Ok(ctx.table(&["replicate", "ratio_stat"], || {
        stats
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i as f64, s.unwrap_or(f64::NAN)])
            .collect()
    }))
}

fn difference(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let n = n_param(ctx);
    let ep = ctx.ep;
    let stats: Vec<f64> = ctx.replicates(|rng| diff_stat(&ctx.outcomes.counts(n, rng), &ep))?;
    let law = comparison_law(ep.p1, ep.p2)?;
    let (var, se) = variance_se(&stats);
    out.push(
        "diff_variance",
        "sample variance of sqrt(n)((M1-M2)/n - (p1-p2))",
        var,
        Some(se),
    );
    let sd = law.delta2.sqrt();
    let std: Vec<f64> = stats.iter().map(|x| x / sd).collect();
    out.push(
        "diff_ks",
        "Kolmogorov-Smirnov distance of the statistic over sqrt(delta2) to the standard normal",
        ks_statistic(&std, gaussian_cdf)?,
        None,
    );
    out.push("delta2", "asymptotic variance", law.delta2, None);
    Ok(ctx.table(&["replicate", "diff_stat"], || {
        stats
            .iter()
            .enumerate()
            .map(|(i, &s)| vec![i as f64, s])
            .collect()
    }))
}

fn dominance(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let n = n_param(ctx);
    let beta = ctx.cfg.params.beta.expect("normalized");
    let ep = ctx.ep;
    let rows: Vec<(u64, u64, bool)> = ctx
        .replicates(|rng| {
            let c = ctx.outcomes.counts(n, rng);
            dominance_holds(&c, &ep, beta).map(|h| (c.m1, c.m2, h))
        })?
        .into_iter()
        .collect::<Result<_>>()?;
    let held = rows.iter().filter(|r| r.2).count();
    let freq = held as f64 / rows.len() as f64;
    out.push(
        "dominance_frequency",
        "fraction of replicates with m_major - m_minor >= n*beta",
        freq,
        Some(proportion_se(freq, rows.len())),
    );
    let leads: Vec<f64> = rows
        .iter()
        .map(|&(m1, m2, _)| (m1 as f64 - m2 as f64).abs() / n as f64)
        .collect();
    let (mean, se) = mean_se(&leads);
    out.push(
        "mean_lead_over_n",
        "sample mean of |M1 - M2|/n",
        mean,
        Some(se),
    );
    out.push(
        "expected_lead_over_n",
        "exact |p1 - p2|",
        (ep.p1 - ep.p2).abs(),
        None,
    );
    Ok(ctx.table(&["replicate", "m1", "m2", "dominant"], || {
        rows.iter()
            .enumerate()
            .map(|(i, &(m1, m2, h))| vec![i as f64, m1 as f64, m2 as f64, f64::from(u8::from(h))])
            .collect()
    }))
}

fn coverage(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let params = &ctx.cfg.params;
    let (n, u) = (n_param(ctx), params.u.expect("normalized"));
    let selected = params.formula.expect("normalized");
    let ep = ctx.ep;
    let r = ctx.cfg.dist.binomial_r();
    let formulas: Vec<CiFormula> = CiFormula::ALL
        .into_iter()
        .filter(|&f| f != CiFormula::AsPublished || as_published_available(&ctx.cfg.dist, &ep))
        .collect();

    let counts = ctx.replicates(|rng| ctx.outcomes.counts(n, rng))?;
    let truth = ep.p1 / ep.p2;
    // Every formula is judged by the same event |M1/M2 - p1/p2| <= halfwidth.
    // For the interval centered on the estimate that is containment of the
    // truth; for the printed interval centered on 1 it is the probability
    // statement it makes about M1/M2.
    let centers: Vec<f64> = counts
        .iter()
        .filter_map(|c| ratio_ci(c, &ep, u, CiFormula::Corrected, r).ok())
        .map(|iv| 0.5 * (iv.lo + iv.hi))
        .collect();
    let undefined = counts.len() - centers.len();
    if centers.is_empty() {
        return Err(Error::Runtime("ratio undefined in every replicate".into()));
    }
    let mut hw = BTreeMap::new();
    let mut covered_by: BTreeMap<CiFormula, f64> = BTreeMap::new();
    for &f in &formulas {
        let h = ratio_ci_halfwidth(n, &ep, u, f, r)?;
        let intervals: Vec<Interval<f64>> =
            centers.iter().map(|&c| Interval::centered(c, h)).collect();
        covered_by.insert(f, coverage_estimate(&intervals, truth)?);
        hw.insert(f, h);
    }

    let reps = centers.len();
    let cov = covered_by[&selected];
    out.push(
        "coverage",
        &format!("fraction of {} intervals containing p1/p2", selected),
        cov,
        Some(proportion_se(cov, reps)),
    );
    for &f in &formulas {
        if f == selected {
            continue;
        }
        let c = covered_by[&f];
        let name = format!("coverage_{}", f.as_str().replace('-', "_"));
        out.push(
            &name,
            &format!("fraction of {f} intervals containing p1/p2"),
            c,
            Some(proportion_se(c, reps)),
        );
    }
    for (f, h) in &hw {
        out.push(
            &format!("halfwidth_{}", f.as_str().replace('-', "_")),
            "interval halfwidth",
            *h,
            None,
        );
    }
    if let (Some(a), Some(c)) = (
        hw.get(&CiFormula::AsPublished),
        hw.get(&CiFormula::Corrected),
    ) {
        out.push(
            "halfwidth_ratio",
            "as-published halfwidth over corrected halfwidth",
            a / c,
            None,
        );
    }
    out.push("nominal_coverage", "1 - u", 1.0 - u, None);
    out.push("truth", "p1/p2", truth, None);
    out.push(
        "undefined_replicates",
        "count with M2 = 0",
        undefined as f64,
        None,
    );

    Ok(ctx.table(&["replicate", "m1", "m2", "ratio"], || {
        counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    i as f64,
                    c.m1 as f64,
                    c.m2 as f64,
                    c.m1 as f64 / c.m2 as f64,
                ]
            })
            .collect()
    }))
}

fn finiteness(ctx: &Ctx, out: &mut Results) -> Result<Option<ReplicateTable>> {
    let horizon = ctx.cfg.params.horizon.expect("normalized");
    let sampler = ctx.cfg.dist.sampler();
    let traces = ctx
        .replicates(|rng| {
            run_record_trace(&sampler, horizon, rng)
                .map(|t| (t.terminated, t.record_count(), t.horizon))
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let reps = traces.len();
    let term = traces.iter().filter(|t| t.0).count() as f64 / reps as f64;
    out.push(
        "terminated_fraction",
        "fraction of traces whose maximum reached uep within the horizon",
        term,
        Some(proportion_se(term, reps)),
    );
    let lone = traces.iter().filter(|t| t.1 == 1).count() as f64 / reps as f64;
    out.push(
        "no_second_record_fraction",
        "fraction of traces with no record after the first observation",
        lone,
        Some(proportion_se(lone, reps)),
    );
    out.push("uep_mass", "exact p2", ctx.ep.p2, None);
    let counts: Vec<f64> = traces.iter().map(|t| t.1 as f64).collect();
    let (mean, se) = mean_se(&counts);
    out.push("mean_record_count", "sample mean", mean, Some(se));
    Ok(ctx.table(
        &["replicate", "terminated", "records", "observations"],
        || {
            traces
                .iter()
                .enumerate()
                .map(|(i, &(t, r, h))| vec![i as f64, f64::from(u8::from(t)), r as f64, h as f64])
                .collect()
        },
    ))
}
