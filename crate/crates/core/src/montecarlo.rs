//! Seeded Monte Carlo estimators and the Kolmogorov-Smirnov distance of the
//! normalized statistic to the standard normal law.
//!
//! Replicate `r` always uses stream `base.stream + r` of the base seed and
//! replicate values are reduced in replicate order, so every estimate is
//! bit-identical for any number of worker threads. The auxiliary variance
//! run behind [`SigmaSource::MonteCarlo`] uses streams starting at
//! [`SIGMA_STREAM_OFFSET`] so it never shares draws with the replicates it
//! normalizes.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::lstat::{HoeffdingDecomposition, LStatistic, SampleEvaluation};
use crate::numeric::{compensated_sum, mean_and_variance};
use crate::oracle::{count_subsets, enumerate_distribution, n_star, ENUMERATION_GUARD};
use crate::sampling::{d1_unchecked, d2_unchecked, draw_indices, RngSpec};

pub const SIGMA_STREAM_OFFSET: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
    pub seed: RngSpec,
}

impl McEstimate {
    /// Whether `target` lies within `k` reported standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    fn from_mean_of(values: &[f64], seed: RngSpec) -> Self {
        let (mean, var) = mean_and_variance(values);
        Self {
            value: mean,
            std_error: (var.max(0.0) / values.len() as f64).sqrt(),
            reps: values.len(),
            seed,
        }
    }
}

/// `Phi(x)` through the complementary error function.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("normal cdf needs a finite argument, got {x}"));
    }
    Ok(0.5 * erfc(-x / std::f64::consts::SQRT_2))
}

/// `sup_x |F_hat(x) - Phi(x)|` for the empirical law of `values`.
pub fn ks_distance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return domain("KS distance of an empty sample");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let r = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x)?;
        let hi = (i + 1) as f64 / r;
        let lo = i as f64 / r;
        d = d.max((hi - f).abs()).max((lo - f).abs());
    }
    Ok(d)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return domain(format!("need at least 2 replicates, got {reps}"));
    }
    Ok(())
}

fn per_replicate<T, F>(reps: usize, base: RngSpec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut Vec<usize>) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map_init(Vec::new, |scratch, r| {
            let mut rng = base.with_stream(base.stream.wrapping_add(r)).rng();
            f(&mut rng, scratch)
        })
        .collect()
}

/// `S_n` of `reps` independent samples, in replicate order.
pub fn replicate_s(stat: &LStatistic<'_>, reps: usize, base: RngSpec) -> Vec<f64> {
    let big_n = stat.population().len();
    let n = stat.n();
    per_replicate(reps, base, |rng, _| {
        let mut idx = draw_indices(big_n, n, rng);
        idx.sort_unstable();
        stat.s_of_sorted_indices(&idx)
    })
}

/// `L`, `S`, `U1` and `R1` of the same samples [`replicate_s`] draws.
pub fn replicate_evaluations(
    stat: &LStatistic<'_>,
    dec: &HoeffdingDecomposition,
    reps: usize,
    base: RngSpec,
) -> Result<Vec<SampleEvaluation>> {
    if dec.g1.len() != stat.population().len() || dec.n != stat.n() {
        return domain("decomposition was built for a different population or sample size");
    }
    let big_n = stat.population().len();
    let n = stat.n();
    Ok(per_replicate(reps, base, |rng, _| {
        let mut idx = draw_indices(big_n, n, rng);
        idx.sort_unstable();
        let l = stat.l_of_sorted_indices(&idx);
        let s = stat.s_of_sorted_indices(&idx);
        let u1 = dec.u1(&idx);
        SampleEvaluation { l, s, u1, r1: s - u1 }
    }))
}

/// Unbiased sample variance of `S_n`. The standard error is that of the
/// mean of the squared deviations.
pub fn mc_variance_s(stat: &LStatistic<'_>, reps: usize, base: RngSpec) -> Result<McEstimate> {
    check_reps(reps)?;
    let s = replicate_s(stat, reps, base);
    let (mean, var) = mean_and_variance(&s);
    let dev: Vec<f64> = s.iter().map(|x| (x - mean) * (x - mean)).collect();
    let (_, dev_var) = mean_and_variance(&dev);
    Ok(McEstimate {
        value: var,
        std_error: (dev_var.max(0.0) / reps as f64).sqrt(),
        reps,
        seed: base,
    })
}

/// Mean of `(n_* D2 S_n)^2` over random extended draws.
pub fn mc_delta2(stat: &LStatistic<'_>, reps: usize, base: RngSpec) -> Result<McEstimate> {
    check_reps(reps)?;
    let big_n = stat.population().len();
    let n = stat.n();
    if n < 2 || n + 2 > big_n {
        return domain(format!("delta_2 needs 2 <= n <= N - 2, got n = {n}, N = {big_n}"));
    }
    let ns = n_star(big_n, n) as f64;
    let values = per_replicate(reps, base, |rng, scratch| {
        let ext = draw_indices(big_n, n + 2, rng);
        let d = ns * d2_unchecked(stat, &ext, scratch);
        d * d
    });
    Ok(McEstimate::from_mean_of(&values, base))
}

/// Mean of `(D1 S_n)^2` over random extended draws.
pub fn mc_d1_moment(stat: &LStatistic<'_>, reps: usize, base: RngSpec) -> Result<McEstimate> {
    check_reps(reps)?;
    let big_n = stat.population().len();
    let n = stat.n();
    let values = per_replicate(reps, base, |rng, scratch| {
        let ext = draw_indices(big_n, n + 1, rng);
        let d = d1_unchecked(stat, &ext, scratch);
        d * d
    });
    Ok(McEstimate::from_mean_of(&values, base))
}

/// Where the normalizing `sigma_n` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSource {
    /// Full enumeration; a resource error if the population is too large.
    Exact,
    /// Independent Monte Carlo run with the given number of replicates.
    MonteCarlo { reps: usize },
    /// Exact when enumerable, Monte Carlo otherwise.
    Auto { reps: usize },
    User(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Exact,
    McEstimate,
    User,
}

impl SigmaKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SigmaKind::Exact => "exact",
            SigmaKind::McEstimate => "mc-estimate",
            SigmaKind::User => "user",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSigma {
    pub sigma: f64,
    pub kind: SigmaKind,
    /// Standard error of `sigma` for Monte Carlo estimates.
    pub std_error: Option<f64>,
}

pub fn resolve_sigma(stat: &LStatistic<'_>, source: SigmaSource, base: RngSpec) -> Result<ResolvedSigma> {
    let exact = || -> Result<ResolvedSigma> {
        let d = enumerate_distribution(stat.population(), stat.weights())?;
        Ok(ResolvedSigma {
            sigma: d.var_s.sqrt(),
            kind: SigmaKind::Exact,
            std_error: None,
        })
    };
    let mc = |reps: usize| -> Result<ResolvedSigma> {
        let est = mc_variance_s(stat, reps, base.with_stream(SIGMA_STREAM_OFFSET))?;
        let sigma = est.value.max(0.0).sqrt();
        // delta method: se(sigma) = se(sigma^2) / (2 sigma)
        let se = if sigma > 0.0 { est.std_error / (2.0 * sigma) } else { 0.0 };
        Ok(ResolvedSigma {
            sigma,
            kind: SigmaKind::McEstimate,
            std_error: Some(se),
        })
    };
    let resolved = match source {
        SigmaSource::Exact => exact()?,
        SigmaSource::MonteCarlo { reps } => mc(reps)?,
        SigmaSource::Auto { reps } => {
            if count_subsets(stat.population().len(), stat.n()) <= ENUMERATION_GUARD {
                exact()?
            } else {
                mc(reps)?
            }
        }
        SigmaSource::User(sigma) => ResolvedSigma {
            sigma,
            kind: SigmaKind::User,
            std_error: None,
        },
    };
    if !resolved.sigma.is_finite() || resolved.sigma <= 0.0 {
        return domain(format!(
            "normalizing sigma must be positive, got {} ({})",
            resolved.sigma,
            resolved.kind.as_str()
        ));
    }
    Ok(resolved)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub ks_distance: f64,
    pub reps: usize,
    pub sigma: ResolvedSigma,
    /// KS distance recomputed with `sigma -/+ one standard error`, when the
    /// normalization is itself an estimate.
    pub ks_sigma_band: Option<(f64, f64)>,
}

/// KS distance between the law of `S_n / sigma_n` over seeded replicates and `Phi`.
pub fn ks_normality(
    stat: &LStatistic<'_>,
    reps: usize,
    base: RngSpec,
    source: SigmaSource,
) -> Result<NormalityReport> {
    check_reps(reps)?;
    let sigma = resolve_sigma(stat, source, base)?;
    let s = replicate_s(stat, reps, base);
    ks_of_replicates(&s, sigma)
}

/// KS report for precomputed replicate values of `S_n`.
pub fn ks_of_replicates(s: &[f64], sigma: ResolvedSigma) -> Result<NormalityReport> {
    let scaled = |sd: f64| -> Vec<f64> { s.iter().map(|x| x / sd).collect() };
    let ks = ks_distance(&scaled(sigma.sigma))?;
    let band = match sigma.std_error {
        Some(se) if se > 0.0 && sigma.sigma - se > 0.0 => Some((
            ks_distance(&scaled(sigma.sigma - se))?,
            ks_distance(&scaled(sigma.sigma + se))?,
        )),
        _ => None,
    };
    Ok(NormalityReport {
        ks_distance: ks,
        reps: s.len(),
        sigma,
        ks_sigma_band: band,
    })
}

/// Empirical second moment, kept for callers that know `E S_n = 0`.
pub fn mean_square(values: &[f64]) -> f64 {
    compensated_sum(values.iter().map(|x| x * x)) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Population;
    use crate::weights::{WeightFunction, WeightScheme};

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        for x in [0.3, 1.0, 2.5, 7.0] {
            let s = normal_cdf(x).unwrap() + normal_cdf(-x).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // scipy.stats.norm.cdf(1.96)
        assert!((normal_cdf(1.96).unwrap() - 0.9750021048517795).abs() < 1e-7);
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn ks_of_point_mass() {
        assert_eq!(ks_distance(&[0.0; 50]).unwrap(), 0.5);
        assert!(ks_distance(&[]).is_err());
    }

    #[test]
    fn small_estimators() {
        let p = Population::new(vec![0.0, 1.0]).unwrap();
        let w = WeightScheme::explicit(vec![1.0]).unwrap();
        let stat = LStatistic::new(&p, &w).unwrap();
        let d1 = mc_d1_moment(&stat, 1000, RngSpec::new(3, 0)).unwrap();
        assert_eq!((d1.value, d1.std_error), (1.0, 0.0));
        assert!(mc_delta2(&stat, 100, RngSpec::new(3, 0)).is_err());
        assert!(mc_variance_s(&stat, 1, RngSpec::new(3, 0)).is_err());

        let flat = Population::new(vec![2.0; 7]).unwrap();
        let g = WeightScheme::from_function(WeightFunction::Gini, 3).unwrap();
        let stat = LStatistic::new(&flat, &g).unwrap();
        let v = mc_variance_s(&stat, 500, RngSpec::new(1, 0)).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(matches!(
            ks_normality(&stat, 100, RngSpec::new(1, 0), SigmaSource::Exact),
            Err(crate::Error::Domain(_))
        ));
        let rep = ks_normality(&stat, 100, RngSpec::new(1, 0), SigmaSource::User(1.0)).unwrap();
        assert_eq!(rep.ks_distance, 0.5);
    }

    #[test]
    fn mean_delta2_vanishes() {
        let p = Population::new(vec![0.1, 0.4, 1.3, 2.0, 2.2, 5.0, 6.5]).unwrap();
        let w = WeightScheme::from_function(WeightFunction::Constant, 3).unwrap();
        let stat = LStatistic::new(&p, &w).unwrap();
        let est = mc_delta2(&stat, 2000, RngSpec::new(5, 0)).unwrap();
        assert!(est.value < 1e-25 && est.std_error < 1e-25, "{est:?}");
    }

    #[test]
    fn replicate_evaluations_match_replicate_s() {
        let p = Population::new(vec![0.0, 0.4, 1.1, 2.0, 2.2, 5.0, 6.5]).unwrap();
        let w = WeightScheme::trimmed(0.2, 0.8, 4).unwrap();
        let stat = LStatistic::new(&p, &w).unwrap();
        let dec = crate::lstat::g1_table(&p, &w).unwrap();
        let base = RngSpec::new(9, 5);
        let s = replicate_s(&stat, 200, base);
        let ev = replicate_evaluations(&stat, &dec, 200, base).unwrap();
        assert!(s.iter().zip(&ev).all(|(a, e)| *a == e.s && (e.u1 + e.r1 - e.s).abs() < 1e-14));
    }
}
