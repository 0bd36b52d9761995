//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line with its measurement and wall-clock time.
//!
//! Run with `cargo test -p finpop-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use finpop_cli::{run_convergence_study, run_with_threads, ExperimentPlan};
use finpop_lstat::combinatorics::{
    placement_prob_exact, rank_pair_prob_1_exact, rank_pair_prob_2_exact, BinomialTable,
};
use finpop_lstat::diagnostics::{delta2_upper_holder, delta2_upper_trimmed, var_upper_d1, var_upper_weights};
use finpop_lstat::montecarlo::{mc_d1_moment, mc_delta2, mc_variance_s};
use finpop_lstat::oracle::{enumerate_distribution, exact_d1_moment, exact_delta2, exact_linear_moments};
use finpop_lstat::{g1_table, LStatistic, Population, RngSpec, WeightFunction, WeightScheme};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;

const SUITE_SEED: u64 = 20_240_601;

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Option<Duration>) -> bool {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let ok = pass && in_time;
    let limit_note = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
    println!(
        "criterion {id:>2} {}: {name}: {detail}; {:.2}s{limit_note}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn normal_population(size: usize, stream: u64) -> Population {
    let mut rng = RngSpec::new(SUITE_SEED, stream).rng();
    Population::new((0..size).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>()).unwrap()
}

/// Normal draws rounded to one decimal, so ties occur.
fn tied_population(size: usize, stream: u64) -> Population {
    let p = normal_population(size, stream);
    Population::new(p.values().iter().map(|x| (x * 2.0).round() / 2.0).collect::<Vec<_>>()).unwrap()
}

/// The enumerable instance suite: N <= 10, every n < N, two populations per
/// N (one with ties), schemes mean / identity / gini / trimmed (0.1, 0.9)
/// where the trimmed mean is defined.
fn small_instances() -> Vec<(Population, WeightScheme)> {
    let mut out = Vec::new();
    for big_n in 2..=10usize {
        for pop in [normal_population(big_n, big_n as u64), tied_population(big_n, 100 + big_n as u64)] {
            for n in 1..big_n {
                for j in [WeightFunction::Constant, WeightFunction::Identity, WeightFunction::Gini] {
                    out.push((pop.clone(), WeightScheme::from_function(j, n).unwrap()));
                }
                if let Ok(t) = WeightScheme::trimmed(0.1, 0.9, n) {
                    out.push((pop.clone(), t));
                }
            }
        }
    }
    out
}

fn for_each_combination(big_n: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        f(&idx);
        let Some(k) = (0..n).rev().find(|&k| idx[k] < big_n - n + k) else { return };
        idx[k] += 1;
        for m in k + 1..n {
            idx[m] = idx[m - 1] + 1;
        }
    }
}

#[test]
fn criterion_01_sample_mean_reduction() {
    let t0 = Instant::now();
    let mut rng = RngSpec::new(SUITE_SEED, 1).rng();
    let mut worst_g1 = 0.0f64;
    for _ in 0..200 {
        let big_n = rng.random_range(2..=100usize);
        let n = rng.random_range(1..big_n);
        let scale = rng.random_range(0.1..100.0f64);
        let values: Vec<f64> = (0..big_n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let pop = Population::new(values).unwrap();
        let w = WeightScheme::from_function(WeightFunction::Constant, n).unwrap();
        let dec = g1_table(&pop, &w).unwrap();
        let mu = pop.mean();
        let xmax = pop.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (g, x) in dec.g1.iter().zip(pop.values()) {
            worst_g1 = worst_g1.max((g - (x - mu) / (n as f64).sqrt()).abs() / (1.0 + xmax));
        }
    }
    let mut worst_r1 = 0.0f64;
    for big_n in 2..=10usize {
        let pop = normal_population(big_n, 500 + big_n as u64);
        for n in 1..big_n {
            let w = WeightScheme::from_function(WeightFunction::Constant, n).unwrap();
            let stat = LStatistic::new(&pop, &w).unwrap();
            let dec = g1_table(&pop, &w).unwrap();
            for_each_combination(big_n, n, |idx| {
                worst_r1 = worst_r1.max(stat.evaluate(&dec, idx).unwrap().r1.abs());
            });
        }
    }
    let pass = worst_g1 <= 1e-12 && worst_r1 <= 1e-12;
    let detail = format!("max relative g1 error {worst_g1:.3e}, max |R1| {worst_r1:.3e} (tol 1e-12)");
    assert!(report(1, "sample-mean reduction", pass, &detail, t0.elapsed(), Some(Duration::from_secs(10))));
}

#[test]
fn criterion_02_classical_srswor_variance() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for big_n in 2..=10usize {
        for pop in [normal_population(big_n, 600 + big_n as u64), tied_population(big_n, 700 + big_n as u64)] {
            for n in 1..big_n {
                let w = WeightScheme::from_function(WeightFunction::Constant, n).unwrap();
                let var_s = enumerate_distribution(&pop, &w).unwrap().var_s;
                let want = pop.variance() * (big_n - n) as f64 / (big_n - 1) as f64;
                worst = worst.max((var_s - want).abs());
            }
        }
    }
    let detail = format!("max |Var S - sigma^2 (N-n)/(N-1)| = {worst:.3e} (tol 1e-12)");
    assert!(report(2, "classical SRSWOR variance", worst <= 1e-12, &detail, t0.elapsed(), Some(Duration::from_secs(5))));
}

#[test]
fn criterion_03_decomposition_orthogonality() {
    let t0 = Instant::now();
    let inst = small_instances();
    let (mut e_u1, mut cov) = (0.0f64, 0.0f64);
    for (pop, w) in &inst {
        let m = exact_linear_moments(pop, w).unwrap();
        e_u1 = e_u1.max(m.e_u1.abs());
        cov = cov.max(m.cov_u1_r1.abs());
    }
    let pass = e_u1 <= 1e-10 && cov <= 1e-10;
    let detail = format!("{} instances, max |E U1| {e_u1:.3e}, max |Cov(U1,R1)| {cov:.3e} (tol 1e-10)", inst.len());
    assert!(report(3, "decomposition orthogonality", pass, &detail, t0.elapsed(), Some(Duration::from_secs(60))));
}

#[test]
fn criterion_04_degeneracy_bound() {
    let t0 = Instant::now();
    let inst = small_instances();
    let (mut checked, mut undefined) = (0usize, 0usize);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_edge = 0.0f64;
    for (pop, w) in &inst {
        let e_r1_sq = exact_linear_moments(pop, w).unwrap().e_r1_sq;
        let n = w.n();
        if n >= 2 && n + 2 <= pop.len() {
            let d2 = exact_delta2(pop, w).unwrap();
            worst_excess = worst_excess.max(e_r1_sq - d2);
            checked += 1;
        } else {
            // delta_2 has no four designated units here; R1 vanishes identically
            worst_edge = worst_edge.max(e_r1_sq);
            undefined += 1;
        }
    }
    let pass = worst_excess <= 1e-10 && worst_edge <= 1e-10;
    let detail = format!(
        "{checked} instances, max (E R1^2 - delta_2) = {worst_excess:.3e}; {undefined} with n in {{1, N-1}}: max E R1^2 = {worst_edge:.3e}"
    );
    assert!(report(4, "degeneracy bound", pass, &detail, t0.elapsed(), None));
}

#[test]
fn criterion_05_proof_level_bounds() {
    let t0 = Instant::now();
    let inst = small_instances();
    let mut excess = [f64::NEG_INFINITY; 4];
    let mut counts = [0usize; 4];
    for (pop, w) in &inst {
        let (big_n, n) = (pop.len(), w.n());
        let var_x = pop.variance();
        let var_s = enumerate_distribution(pop, w).unwrap().var_s;
        let d1 = exact_d1_moment(pop, w).unwrap();
        excess[0] = excess[0].max(var_s - var_upper_d1(big_n, n, d1));
        excess[1] = excess[1].max(var_s - var_upper_weights(w.sup_bound(), big_n, n, var_x));
        counts[0] += 1;
        counts[1] += 1;
        if n < 2 || n + 2 > big_n {
            continue;
        }
        let d2 = exact_delta2(pop, w).unwrap();
        for delta in [0.55, 0.6, 0.75, 0.9, 1.0] {
            match w.trimming() {
                None => {
                    let b = w.diagnostics(delta).unwrap().holder_b_at_delta;
                    excess[2] = excess[2].max(d2 - delta2_upper_holder(b, n, delta, var_x));
                    counts[2] += 1;
                }
                Some((t1, t2)) => {
                    let c = pop.smoothness_profile(delta).unwrap().c_min;
                    if let Some(bound) = delta2_upper_trimmed(t1, t2, big_n, n, c, delta) {
                        excess[3] = excess[3].max(d2 - bound);
                        counts[3] += 1;
                    }
                }
            }
        }
    }
    let pass = excess.iter().all(|e| *e <= 1e-10) && counts.iter().all(|&c| c > 0);
    let detail = format!(
        "max excess over bound: D1 {:.3e} ({}), weights {:.3e} ({}), Hölder {:.3e} ({}), trimmed {:.3e} ({})",
        excess[0], counts[0], excess[1], counts[1], excess[2], counts[2], excess[3], counts[3]
    );
    assert!(report(5, "proof-level bounds", pass, &detail, t0.elapsed(), None));
}

#[test]
fn criterion_06_combinatorial_identities() {
    let t0 = Instant::now();
    let t = BinomialTable::new(20);
    let mut failures = Vec::new();
    let mut checks = 0usize;
    for big_n in 2..=20usize {
        for n_plus in 2..=big_n {
            let want = BigRational::new(t.get_int(big_n - 2, n_plus - 2).unwrap(), t.get_int(big_n, n_plus).unwrap());
            for l in 1..=big_n {
                for m in l + 1..=big_n {
                    let mut sum = BigRational::zero();
                    for i in 1..=n_plus {
                        for j in i + 1..=n_plus {
                            sum += placement_prob_exact(&t, big_n, n_plus, i, j, l, m).unwrap();
                        }
                    }
                    checks += 1;
                    if sum != want {
                        failures.push(format!("vandermonde N={big_n} n+={n_plus} l={l} m={m}"));
                    }
                }
            }
        }
        // spacing closed form for every valid n and position
        for n in 1..=big_n.saturating_sub(2) {
            let rhs = BigRational::new(
                t.get_int(big_n, n + 2).unwrap() * BigInt::from((big_n + 1) * (2 * big_n - n)),
                BigInt::from((n + 3) * (n + 4)),
            );
            for p in 1..=n + 1 {
                let mut s = BigInt::zero();
                for l in 1..=big_n {
                    for m in l + 1..=big_n {
                        let d = BigInt::from(m - l);
                        s += &d * &d * t.get_int(l - 1, p - 1).unwrap() * t.get_int(big_n - m, n + 1 - p).unwrap();
                    }
                }
                checks += 1;
                if BigRational::from_integer(s) != rhs {
                    failures.push(format!("spacing N={big_n} n={n} p={p}"));
                }
            }
        }
    }
    for n in 1..=20usize {
        let mut s1 = BigRational::zero();
        let mut s2 = BigRational::zero();
        for i in 1..=n + 2 {
            for j in i + 1..=n + 2 {
                if j <= n + 1 {
                    s1 += rank_pair_prob_1_exact(n, i, j).unwrap();
                }
                if n >= 2 {
                    s2 += rank_pair_prob_2_exact(n, i, j).unwrap();
                }
            }
        }
        checks += 2;
        if !s1.is_one() || (n >= 2 && !s2.is_one()) {
            failures.push(format!("rank laws n={n}"));
        }
    }
    let small = {
        let mut s = BigInt::zero();
        for l in 1..=5usize {
            for m in l + 1..=5usize {
                s += BigInt::from((m - l) * (m - l)) * t.get_int(l - 1, 0).unwrap() * t.get_int(5 - m, 1).unwrap();
            }
        }
        s
    };
    if small != BigInt::from(27) {
        failures.push(format!("N=5, n=1 spacing sum is {small}, expected 27"));
    }
    let detail = format!("{checks} exact identities, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>());
    assert!(report(6, "combinatorial identities (N <= 20)", failures.is_empty(), &detail, t0.elapsed(), Some(Duration::from_secs(60))));
}

#[test]
fn criterion_07_monte_carlo_vs_oracle() {
    let t0 = Instant::now();
    let reps = 100_000;
    let cases = [
        (normal_population(8, 801), WeightScheme::from_function(WeightFunction::Gini, 4).unwrap(), 71u64),
        (tied_population(10, 802), WeightScheme::trimmed(0.1, 0.9, 5).unwrap(), 72),
        (normal_population(9, 803), WeightScheme::from_function(WeightFunction::Identity, 3).unwrap(), 73),
        (normal_population(10, 804), WeightScheme::from_function(WeightFunction::Constant, 6).unwrap(), 74),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, (pop, w, seed)) in cases.iter().enumerate() {
        let stat = LStatistic::new(pop, w).unwrap();
        let base = RngSpec::new(*seed, 0);
        let pairs = [
            ("var", mc_variance_s(&stat, reps, base).unwrap(), enumerate_distribution(pop, w).unwrap().var_s),
            ("d1", mc_d1_moment(&stat, reps, base).unwrap(), exact_d1_moment(pop, w).unwrap()),
            ("delta2", mc_delta2(&stat, reps, base).unwrap(), exact_delta2(pop, w).unwrap()),
        ];
        for (name, est, exact) in pairs {
            // a zero-variance estimator can only differ by rounding
            let tol = (3.0 * est.std_error).max(1e-12);
            let z = if est.std_error > 0.0 { (est.value - exact) / est.std_error } else { 0.0 };
            pass &= (est.value - exact).abs() <= tol;
            lines.push(format!("case{k}/{name} z={z:+.2}"));
        }
    }
    let detail = format!("{} at 1e5 reps: {}", if pass { "all within 3 SE" } else { "outside 3 SE" }, lines.join(" "));
    assert!(report(7, "Monte Carlo vs oracle", pass, &detail, t0.elapsed(), Some(Duration::from_secs(120))));
}

fn ks_column(population: &str) -> (Vec<f64>, Vec<String>) {
    let plan = ExperimentPlan::parse(&format!(
        "population = {population}\nfamily = 40:20, 100:50, 250:125, 600:300\nweights = trimmed:0.1,0.9\nreps = 20000\nseed = 2024\n"
    ))
    .unwrap();
    let out = run_convergence_study(&plan).unwrap();
    let mut ks = Vec::new();
    let mut notes = Vec::new();
    for row in &out.rows {
        let v = row.outcome.as_ref().expect("row failed");
        ks.push(v.ks_distance);
        notes.push(format!("N={} ks={:.4} ({})", row.pop_size, v.ks_distance, v.sigma_kind));
    }
    (ks, notes)
}

#[test]
fn criterion_08_trimmed_mean_convergence_trend() {
    let t0 = Instant::now();
    let (ks, notes) = ks_column("equispaced");
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let last = *ks.last().unwrap();
    let pass = decreasing && last <= 0.05;
    let detail = format!(
        "{}; strictly decreasing: {decreasing}; ks at N=600 {last:.4} (<= 0.05)",
        notes.join(", ")
    );
    assert!(report(8, "trimmed-mean KS trend, equispaced", pass, &detail, t0.elapsed(), Some(Duration::from_secs(300))));
}

#[test]
fn criterion_09_negative_control() {
    let t0 = Instant::now();
    // jump at the 10% quantile, exactly where the lower trimming cuts
    let (ks, notes) = ks_column("two-point:0,1,0.1");
    let min = ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let pop = "two-point:0,1,0.1".parse::<finpop_cli::PopulationSpec>().unwrap();
    let c_min: Vec<f64> = [40, 100, 250, 600]
        .iter()
        .map(|&n| pop.generate(Some(n)).unwrap().smoothness_profile(1.0).unwrap().c_min)
        .collect();
    let pass = min >= 0.1;
    let detail = format!("{}; min ks {min:.4} (>= 0.1); c_min(delta=1) {c_min:?}", notes.join(", "));
    assert!(report(9, "negative control, two-point jump", pass, &detail, t0.elapsed(), Some(Duration::from_secs(300))));
}

fn run_binary(plan: &Path, out: &Path, threads: usize) {
    let status = Command::new(env!("CARGO_BIN_EXE_finpop"))
        .args(["--threads", &threads.to_string(), "experiment", "--plan"])
        .arg(plan)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn criterion_10_reproducibility() {
    let t0 = Instant::now();
    let text = "population = pareto:3\nfamily = 9:4, 40:20, 80:9, 120:60\nweights = gini\nreps = 3000\nsigma_reps = 5000\nseed = 99\n";
    let plan = ExperimentPlan::parse(text).unwrap();
    let runs: Vec<String> = [1, 2, 5, 8]
        .iter()
        .map(|&t| run_with_threads(&plan, Some(t)).unwrap().csv)
        .collect();
    let in_process = runs.windows(2).all(|w| w[0] == w[1]);

    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("plan.txt");
    std::fs::write(&plan_path, text).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_binary(&plan_path, &a, 1);
    run_binary(&plan_path, &b, 6);
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    let cli_same = bytes_a == bytes_b && bytes_a == runs[0].as_bytes();

    let pass = in_process && cli_same;
    let detail = format!(
        "library runs at 1/2/5/8 threads identical: {in_process}; CLI runs at 1/6 threads byte-identical: {cli_same} ({} bytes)",
        bytes_a.len()
    );
    assert!(report(10, "reproducibility across worker counts", pass, &detail, t0.elapsed(), None));
}
