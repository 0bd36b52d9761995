//! Finite-scale evaluation of the normality conditions and of the explicit
//! upper bounds used to establish them.
//!
//! Nothing here renders a verdict on an asymptotic clause. Each quantity is
//! reported at the given `(N, n)`; trends are judged by the caller across a
//! family of populations.

use crate::error::{domain, Result};
use crate::lstat::{g1_table, HoeffdingDecomposition, LStatistic};
use crate::montecarlo::{mc_d1_moment, mc_delta2, mc_variance_s};
use crate::numeric::compensated_sum;
use crate::oracle::{count_subsets, exact_d1_moment, exact_delta2, n_star, ENUMERATION_GUARD};
use crate::oracle::enumerate_distribution;
use crate::population::{check_delta, Population};
use crate::sampling::RngSpec;
use crate::weights::{trim_bounds, WeightDiagnostics, WeightScheme};

pub const DEFAULT_EPSILONS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];
pub const DEFAULT_DELTAS: [f64; 5] = [0.55, 0.6, 0.75, 0.9, 1.0];

/// `(eps, value)` pairs in grid order.
pub type EpsilonMap = Vec<(f64, f64)>;

/// `tau = sqrt(N p q)` with `p = n / N`.
pub fn tau(pop_size: usize, n: usize) -> f64 {
    let p = n as f64 / pop_size as f64;
    (pop_size as f64 * p * (1.0 - p)).sqrt()
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if let Some(bad) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return domain(format!("epsilon must be positive and finite, got {bad}"));
    }
    Ok(())
}

fn check_sizes(pop_size: usize, n: usize) -> Result<()> {
    if n == 0 || n >= pop_size {
        return domain(format!("sample size must satisfy 1 <= n < N, got n = {n}, N = {pop_size}"));
    }
    Ok(())
}

/// `sigma^-2 E (X - EX)^2 1{|X - EX| > eps tau sigma}` under a uniform draw.
pub fn erdos_renyi_classical(pop: &Population, n: usize, epsilons: &[f64]) -> Result<EpsilonMap> {
    check_sizes(pop.len(), n)?;
    check_epsilons(epsilons)?;
    let var = pop.variance();
    if var.is_nan() || var <= 0.0 {
        return domain("Erdős–Rényi quantity needs a non-constant population");
    }
    let mu = pop.mean();
    let sigma = var.sqrt();
    let t = tau(pop.len(), n);
    let big_n = pop.len() as f64;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let thr = eps * t * sigma;
            let tail = compensated_sum(
                pop.values()
                    .iter()
                    .map(|x| x - mu)
                    .filter(|d| d.abs() > thr)
                    .map(|d| d * d),
            );
            (eps, tail / big_n / var)
        })
        .collect())
}

/// `sigma_1^-2 E g1^2 1{|g1| > eps tau sigma_1}`.
pub fn erdos_renyi_g1(dec: &HoeffdingDecomposition, pop_size: usize, n: usize, epsilons: &[f64]) -> Result<EpsilonMap> {
    check_sizes(pop_size, n)?;
    check_epsilons(epsilons)?;
    if dec.sigma1_sq.is_nan() || dec.sigma1_sq <= 0.0 {
        return domain("Erdős–Rényi quantity for g1 needs sigma_1 > 0");
    }
    let s1 = dec.sigma1_sq.sqrt();
    let t = tau(pop_size, n);
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let thr = eps * t * s1;
            let tail = compensated_sum(dec.g1.iter().filter(|g| g.abs() > thr).map(|g| g * g));
            (eps, tail / dec.g1.len() as f64 / dec.sigma1_sq)
        })
        .collect())
}

/// `n_* E g1^2 1{g1^2 > eps}`.
pub fn lindeberg_g1(dec: &HoeffdingDecomposition, pop_size: usize, n: usize, epsilons: &[f64]) -> Result<EpsilonMap> {
    check_sizes(pop_size, n)?;
    check_epsilons(epsilons)?;
    let ns = n_star(pop_size, n) as f64;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let tail = compensated_sum(dec.g1.iter().map(|g| g * g).filter(|g2| *g2 > eps));
            (eps, ns * tail / dec.g1.len() as f64)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub er_classical: EpsilonMap,
    pub er_g1: EpsilonMap,
    pub lindeberg_g1: EpsilonMap,
    pub tau: f64,
    pub n_star: usize,
    pub sigma1_sq: f64,
}

pub fn condition_report(pop: &Population, dec: &HoeffdingDecomposition, epsilons: &[f64]) -> Result<ConditionReport> {
    let (big_n, n) = (pop.len(), dec.n);
    Ok(ConditionReport {
        er_classical: erdos_renyi_classical(pop, n, epsilons)?,
        er_g1: erdos_renyi_g1(dec, big_n, n, epsilons)?,
        lindeberg_g1: lindeberg_g1(dec, big_n, n, epsilons)?,
        tau: tau(big_n, n),
        n_star: n_star(big_n, n),
        sigma1_sq: dec.sigma1_sq,
    })
}

/// `a^2 (N - n)/(N - 1) Var X_1`.
pub fn var_upper_weights(a: f64, pop_size: usize, n: usize, var_x: f64) -> f64 {
    a * a * (pop_size - n) as f64 / (pop_size - 1) as f64 * var_x
}

/// `(1/2) n (1 - n/N) E (D1 S_n)^2`.
pub fn var_upper_d1(pop_size: usize, n: usize, d1_moment: f64) -> f64 {
    0.5 * n as f64 * (1.0 - n as f64 / pop_size as f64) * d1_moment
}

/// `24 B^2 n^(1 - 2 delta) Var X_1`.
pub fn delta2_upper_holder(holder_b: f64, n: usize, delta: f64, var_x: f64) -> f64 {
    24.0 * holder_b * holder_b * (n as f64).powf(1.0 - 2.0 * delta) * var_x
}

/// The explicit trimmed-mean bound on `delta_2` before its constants are
/// absorbed:
/// `C1 n_*^2 n^-1 C(n+2,4)^-1 (C^2 / N^(2 delta)) (N+1)(2N-n)/((n+3)(n+4))
/// [(n+2)^4/64 + (n+1)^4/32]` with `C1 = (t2 - t1 - 1/n)^-2`.
///
/// `None` when `n <= 1/(t2 - t1)` or `n < 2`.
pub fn delta2_upper_trimmed(t1: f64, t2: f64, pop_size: usize, n: usize, c: f64, delta: f64) -> Option<f64> {
    let nf = n as f64;
    if n < 2 || nf <= 1.0 / (t2 - t1) {
        return None;
    }
    let big_n = pop_size as f64;
    let c1 = (t2 - t1 - 1.0 / nf).powi(-2);
    let ns = n_star(pop_size, n) as f64;
    let m = nf + 2.0;
    let c4 = m * (m - 1.0) * (m - 2.0) * (m - 3.0) / 24.0;
    let spacing = c * c / big_n.powf(2.0 * delta) * (big_n + 1.0) * (2.0 * big_n - nf) / ((nf + 3.0) * (nf + 4.0));
    let counts = (nf + 2.0).powi(4) / 64.0 + (nf + 1.0).powi(4) / 32.0;
    Some(c1 * ns * ns / nf / c4 * spacing * counts)
}

/// `(1 - n/N)^-1 n^(1/2) N^(delta - 1)`.
pub fn theorem2_growth(pop_size: usize, n: usize, delta: f64) -> f64 {
    let big_n = pop_size as f64;
    (n as f64).sqrt() * big_n.powf(delta - 1.0) / (1.0 - n as f64 / big_n)
}

/// `(a C / 2) n^-1/2 N^-delta (N - 1)`, the uniform bound on `|g1|` under the
/// power-law smoothness condition.
pub fn g1_sup_bound(a: f64, c: f64, pop_size: usize, n: usize, delta: f64) -> f64 {
    let big_n = pop_size as f64;
    0.5 * a * c * (big_n - 1.0) / ((n as f64).sqrt() * big_n.powf(delta))
}

/// Bounds at one smoothness exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub delta: f64,
    pub c_min: f64,
    pub holder_b: f64,
    pub var_upper_weights: f64,
    pub var_upper_d1: Option<f64>,
    pub delta2_upper_holder: f64,
    pub delta2_upper_trimmed: Option<f64>,
    pub theorem2_growth: f64,
}

fn bounds_rows(
    pop: &Population,
    w: &WeightScheme,
    deltas: &[f64],
    d1_moment: Option<f64>,
) -> Result<Vec<BoundsReport>> {
    let (big_n, n) = (pop.len(), w.n());
    check_sizes(big_n, n)?;
    let var_x = pop.variance();
    deltas
        .iter()
        .map(|&delta| {
            let smooth = pop.smoothness_profile(delta)?;
            let wd = w.diagnostics(delta)?;
            let trimmed = w
                .trimming()
                .and_then(|(t1, t2)| delta2_upper_trimmed(t1, t2, big_n, n, smooth.c_min, delta));
            Ok(BoundsReport {
                delta,
                c_min: smooth.c_min,
                holder_b: wd.holder_b_at_delta,
                var_upper_weights: var_upper_weights(wd.sup_bound_a, big_n, n, var_x),
                var_upper_d1: d1_moment.map(|m| var_upper_d1(big_n, n, m)),
                delta2_upper_holder: delta2_upper_holder(wd.holder_b_at_delta, n, delta, var_x),
                delta2_upper_trimmed: trimmed,
                theorem2_growth: theorem2_growth(big_n, n, delta),
            })
        })
        .collect()
}

/// A moment that was either enumerated exactly or estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimated {
    pub value: f64,
    /// `None` for exact values.
    pub std_error: Option<f64>,
}

impl Estimated {
    fn exact(value: f64) -> Self {
        Self { value, std_error: None }
    }

    pub fn is_exact(&self) -> bool {
        self.std_error.is_none()
    }
}

/// Monte Carlo settings used when a moment cannot be enumerated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub reps: usize,
    pub seed: u64,
}

/// Grid Hölder constants of the same weight family at `n, 2n, 4n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderTrend {
    pub delta: f64,
    pub sizes: Vec<usize>,
    pub holder_b: Vec<f64>,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Flags {
    /// `max |c_j|` is finite.
    pub weights_bounded: bool,
    /// Largest grid exponent at which the grid Hölder constant does not grow
    /// along `n, 2n, 4n`; `None` when it grows at every exponent or the
    /// weights cannot be rebuilt for other sample sizes.
    pub holder_stable_delta: Option<f64>,
    pub sigma_positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub conditions: ConditionReport,
    pub weights: Vec<WeightDiagnostics>,
    pub holder_trend: Vec<HolderTrend>,
    pub bounds: Vec<BoundsReport>,
    pub sigma_tilde_sq: Estimated,
    pub d1_moment: Estimated,
    pub delta2: Option<Estimated>,
    pub second_moment: f64,
    pub flags: Theorem1Flags,
}

fn holder_trend(w: &WeightScheme, deltas: &[f64]) -> Result<Vec<HolderTrend>> {
    let n = w.n();
    let sizes = [n, 2 * n, 4 * n];
    let mut family = Vec::with_capacity(3);
    for &m in &sizes {
        match w.rebuild(m) {
            Some(r) => family.push(r?),
            None => return Ok(Vec::new()),
        }
    }
    deltas
        .iter()
        .map(|&delta| {
            let b = family
                .iter()
                .map(|ws| ws.diagnostics(delta).map(|d| d.holder_b_at_delta))
                .collect::<Result<Vec<_>>>()?;
            let tol = 1e-12 * b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            Ok(HolderTrend {
                delta,
                sizes: sizes.to_vec(),
                non_increasing: b.windows(2).all(|p| p[1] <= p[0] + tol),
                holder_b: b,
            })
        })
        .collect()
}

/// Every quantity entering the general-weights normality theorem at one
/// `(N, n)`.
///
/// `sigma_n^2`, `E (D1 S_n)^2` and `delta_2` are enumerated when within the
/// guard and estimated with `mc` otherwise.
pub fn theorem1_report(
    pop: &Population,
    w: &WeightScheme,
    deltas: &[f64],
    epsilons: &[f64],
    mc: McSettings,
) -> Result<Theorem1Report> {
    let (big_n, n) = (pop.len(), w.n());
    check_sizes(big_n, n)?;
    for &d in deltas {
        check_delta(d)?;
    }
    let stat = LStatistic::new(pop, w)?;
    let base = RngSpec::new(mc.seed, 0);

    let sigma_tilde_sq = if count_subsets(big_n, n) <= ENUMERATION_GUARD {
        Estimated::exact(enumerate_distribution(pop, w)?.var_s)
    } else {
        let e = mc_variance_s(&stat, mc.reps, base)?;
        Estimated { value: e.value, std_error: Some(e.std_error) }
    };
    if sigma_tilde_sq.value.is_nan() || sigma_tilde_sq.value <= 0.0 {
        return domain("Var S_n vanishes; the normalized statistic is undefined");
    }

    let d1_moment = match exact_d1_moment(pop, w) {
        Ok(v) => Estimated::exact(v),
        Err(crate::Error::Resource(_)) => {
            let e = mc_d1_moment(&stat, mc.reps, base)?;
            Estimated { value: e.value, std_error: Some(e.std_error) }
        }
        Err(e) => return Err(e),
    };
    let delta2 = if n >= 2 && n + 2 <= big_n {
        Some(match exact_delta2(pop, w) {
            Ok(v) => Estimated::exact(v),
            Err(crate::Error::Resource(_)) => {
                let e = mc_delta2(&stat, mc.reps, base)?;
                Estimated { value: e.value, std_error: Some(e.std_error) }
            }
            Err(e) => return Err(e),
        })
    } else {
        None
    };

    let dec = g1_table(pop, w)?;
    let conditions = condition_report(pop, &dec, epsilons)?;
    let weights = deltas.iter().map(|&d| w.diagnostics(d)).collect::<Result<Vec<_>>>()?;
    let trend = holder_trend(w, deltas)?;
    let holder_stable_delta = trend
        .iter()
        .filter(|t| t.non_increasing)
        .map(|t| t.delta)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));

    Ok(Theorem1Report {
        conditions,
        bounds: bounds_rows(pop, w, deltas, Some(d1_moment.value))?,
        weights,
        holder_trend: trend,
        sigma_tilde_sq,
        d1_moment,
        delta2,
        second_moment: pop.second_moment(),
        flags: Theorem1Flags {
            weights_bounded: w.sup_bound().is_finite(),
            holder_stable_delta,
            sigma_positive: sigma_tilde_sq.value > 0.0,
        },
    })
}

/// Bounds entering the trimmed-mean normality theorem, one row per exponent.
pub fn theorem2_report(pop: &Population, t1: f64, t2: f64, n: usize, deltas: &[f64]) -> Result<Vec<BoundsReport>> {
    check_sizes(pop.len(), n)?;
    trim_bounds(t1, t2, n)?;
    let w = WeightScheme::trimmed(t1, t2, n)?;
    bounds_rows(pop, &w, deltas, None)
}
