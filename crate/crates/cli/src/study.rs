//! Convergence studies along a family of `(N, n)` pairs.

use std::fmt::Write as _;
use std::time::Instant;

use finpop_lstat::diagnostics::{condition_report, theorem2_growth};
use finpop_lstat::montecarlo::{ks_of_replicates, replicate_evaluations, resolve_sigma, SigmaSource};
use finpop_lstat::numeric::compensated_sum;
use finpop_lstat::oracle::n_star;
use finpop_lstat::{g1_table, LStatistic, RngSpec};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::plan::ExperimentPlan;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct RowValues {
    pub n_star: usize,
    pub tau: f64,
    pub ks_distance: f64,
    /// KS distance with `sigma_n` moved down/up by one standard error.
    pub ks_band: Option<(f64, f64)>,
    pub sigma_tilde: f64,
    pub sigma_kind: &'static str,
    pub sigma_se: Option<f64>,
    pub sigma1_sq: f64,
    /// Replicate mean of `R1^2` and `max |R1|`.
    pub r1_mean_sq: f64,
    pub r1_max_abs: f64,
    pub er_classical: Vec<f64>,
    pub er_g1: Vec<f64>,
    pub lindeberg_g1: Vec<f64>,
    pub c_min: Vec<f64>,
    pub growth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub pop_size: usize,
    pub n: usize,
    pub outcome: Result<RowValues, String>,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    pub csv: String,
    pub log: String,
}

fn run_row(plan: &ExperimentPlan, pop_size: usize, n: usize) -> CliResult<RowValues> {
    let pop = plan.population.generate(Some(pop_size))?;
    let w = plan.weights.build(n)?;
    let stat = LStatistic::new(&pop, &w)?;
    let dec = g1_table(&pop, &w)?;
    let base = RngSpec::new(plan.seed, 0);

    let sigma = resolve_sigma(&stat, SigmaSource::Auto { reps: plan.sigma_reps }, base)?;
    let ev = replicate_evaluations(&stat, &dec, plan.reps, base)?;
    let s: Vec<f64> = ev.iter().map(|e| e.s).collect();
    let report = ks_of_replicates(&s, sigma)?;
    let cond = condition_report(&pop, &dec, &plan.epsilons)?;
    let c_min = plan
        .deltas
        .iter()
        .map(|&d| pop.smoothness_profile(d).map(|p| p.c_min))
        .collect::<finpop_lstat::Result<Vec<_>>>()?;

    let second = |m: &[(f64, f64)]| m.iter().map(|p| p.1).collect::<Vec<_>>();
    Ok(RowValues {
        n_star: n_star(pop_size, n),
        tau: cond.tau,
        ks_distance: report.ks_distance,
        ks_band: report.ks_sigma_band,
        sigma_tilde: sigma.sigma,
        sigma_kind: sigma.kind.as_str(),
        sigma_se: sigma.std_error,
        sigma1_sq: dec.sigma1_sq,
        r1_mean_sq: compensated_sum(ev.iter().map(|e| e.r1 * e.r1)) / ev.len() as f64,
        r1_max_abs: ev.iter().fold(0.0, |m, e| m.max(e.r1.abs())),
        er_classical: second(&cond.er_classical),
        er_g1: second(&cond.er_g1),
        lindeberg_g1: second(&cond.lindeberg_g1),
        c_min,
        growth: plan.deltas.iter().map(|&d| theorem2_growth(pop_size, n, d)).collect(),
    })
}

fn header(plan: &ExperimentPlan) -> String {
    let mut cols: Vec<String> = [
        "version", "plan_hash", "seed", "row", "N", "n", "weights", "status", "n_star", "tau", "ks_distance",
        "ks_sigma_lo", "ks_sigma_hi", "sigma_tilde", "sigma_kind", "sigma_se", "sigma1_sq", "r1_mean_sq",
        "r1_max_abs",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in ["er_classical", "er_g1", "lindeberg_g1"] {
        cols.extend(plan.epsilons.iter().map(|e| format!("{name}@{e}")));
    }
    for name in ["c_min", "theorem2_growth"] {
        cols.extend(plan.deltas.iter().map(|d| format!("{name}@{d}")));
    }
    cols.push("reason".into());
    cols.join(",")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_line(plan: &ExperimentPlan, hash: &str, idx: usize, row: &StudyRow) -> String {
    let mut f: Vec<String> = vec![
        VERSION.into(),
        hash.into(),
        plan.seed.to_string(),
        idx.to_string(),
        row.pop_size.to_string(),
        row.n.to_string(),
        quote(&plan.weights.to_string()),
    ];
    let grid_cols = 3 * plan.epsilons.len() + 2 * plan.deltas.len();
    match &row.outcome {
        Ok(v) => {
            f.push("ok".into());
            f.push(v.n_star.to_string());
            f.push(v.tau.to_string());
            f.push(v.ks_distance.to_string());
            f.push(opt(v.ks_band.map(|b| b.0)));
            f.push(opt(v.ks_band.map(|b| b.1)));
            f.push(v.sigma_tilde.to_string());
            f.push(v.sigma_kind.into());
            f.push(opt(v.sigma_se));
            f.push(v.sigma1_sq.to_string());
            f.push(v.r1_mean_sq.to_string());
            f.push(v.r1_max_abs.to_string());
            for col in [&v.er_classical, &v.er_g1, &v.lindeberg_g1, &v.c_min, &v.growth] {
                f.extend(col.iter().map(f64::to_string));
            }
            f.push(String::new());
        }
        Err(reason) => {
            f.push("error".into());
            f.extend(std::iter::repeat_n(String::new(), 11 + grid_cols));
            f.push(quote(reason));
        }
    }
    f.join(",")
}

/// Runs every `(N, n)` of the plan on the current rayon pool. Rows that
/// fail carry their reason instead of values; the sweep continues.
///
/// The CSV is a function of the plan alone. Wall-clock times go to the log.
pub fn run_convergence_study(plan: &ExperimentPlan) -> CliResult<StudyOutput> {
    plan.validate()?;
    let hash = plan.hash();
    let timed: Vec<(StudyRow, f64)> = plan
        .family
        .par_iter()
        .map(|&(pop_size, n)| {
            let t0 = Instant::now();
            let outcome = run_row(plan, pop_size, n).map_err(|e| e.to_string());
            (StudyRow { pop_size, n, outcome }, t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut csv = header(plan);
    csv.push('\n');
    let mut log = format!("finpop {VERSION} plan {hash} seed {}\n", plan.seed);
    for (i, (row, secs)) in timed.iter().enumerate() {
        csv.push_str(&csv_line(plan, &hash, i, row));
        csv.push('\n');
        let _ = match &row.outcome {
            Ok(v) => writeln!(
                log,
                "row {i} N={} n={} ok ks={} sigma={} ({}) runtime={secs:.3}s",
                row.pop_size, row.n, v.ks_distance, v.sigma_tilde, v.sigma_kind
            ),
            Err(r) => writeln!(log, "row {i} N={} n={} error: {r} runtime={secs:.3}s", row.pop_size, row.n),
        };
    }
    Ok(StudyOutput {
        rows: timed.into_iter().map(|(r, _)| r).collect(),
        csv,
        log,
    })
}

/// [`run_convergence_study`] on a dedicated pool of `threads` workers
/// (`None`: the rayon default).
pub fn run_with_threads(plan: &ExperimentPlan, threads: Option<usize>) -> CliResult<StudyOutput> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_convergence_study(plan))
}
