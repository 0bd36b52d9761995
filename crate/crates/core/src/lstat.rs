//! The L-statistic, its centred form and the linear part of its Hoeffding
//! decomposition.

use rayon::prelude::*;

use crate::combinatorics::FloatBinomials;
use crate::error::{domain, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::population::Population;
use crate::weights::WeightScheme;

/// `(1/n) sum_j c_j X_{j:n}`.
pub fn l_statistic(w: &WeightScheme, sample_values: &[f64]) -> Result<f64> {
    if sample_values.len() != w.n() {
        return domain(format!(
            "sample has {} values, weights were built for n = {}",
            sample_values.len(),
            w.n()
        ));
    }
    let mut sorted = sample_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(weighted_sorted(w.c(), &sorted))
}

fn weighted_sorted(c: &[f64], sorted: &[f64]) -> f64 {
    compensated_sum(c.iter().zip(sorted).map(|(c, x)| c * x)) / c.len() as f64
}

fn check_sizes(pop: &Population, n: usize) -> Result<()> {
    if n == 0 || n >= pop.len() {
        return domain(format!("sample size must satisfy 1 <= n < N, got n = {n}, N = {}", pop.len()));
    }
    Ok(())
}

/// Exact `E L_n` from the law of the population index of each order statistic.
pub fn expected_l(pop: &Population, w: &WeightScheme) -> Result<f64> {
    let n = w.n();
    check_sizes(pop, n)?;
    let big_n = pop.len();
    let x = pop.values();
    let fb = FloatBinomials::new(big_n);
    let mut acc = CompensatedSum::new();
    for (j, &c) in (1..=n).zip(w.c()) {
        if c == 0.0 {
            continue;
        }
        // X_{j:n} = x_i needs i >= j and N - i >= n - j.
        let mean_j = compensated_sum((j..=big_n - (n - j)).map(|i| {
            x[i - 1] * fb.ratio(&[(i - 1, j - 1), (big_n - i, n - j)], &[(big_n, n)])
        }));
        acc.add(c * mean_j);
    }
    Ok(acc.value() / n as f64)
}

/// Values of one sample under a fixed statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEvaluation {
    pub l: f64,
    /// `sqrt(n) (L - E L)`.
    pub s: f64,
    /// `sum_i g1(X_i)`.
    pub u1: f64,
    /// `S - U1`.
    pub r1: f64,
}

/// An L-statistic bound to a population: weights plus the exact centring
/// constant `E L_n`.
#[derive(Debug, Clone)]
pub struct LStatistic<'a> {
    pop: &'a Population,
    weights: &'a WeightScheme,
    expected_l: f64,
}

impl<'a> LStatistic<'a> {
    pub fn new(pop: &'a Population, weights: &'a WeightScheme) -> Result<Self> {
        let expected_l = expected_l(pop, weights)?;
        Ok(Self {
            pop,
            weights,
            expected_l,
        })
    }

    /// Uses a caller-supplied centring constant instead of computing it.
    pub fn with_expected_l(pop: &'a Population, weights: &'a WeightScheme, expected_l: f64) -> Result<Self> {
        check_sizes(pop, weights.n())?;
        Ok(Self {
            pop,
            weights,
            expected_l,
        })
    }

    pub fn population(&self) -> &'a Population {
        self.pop
    }

    pub fn weights(&self) -> &'a WeightScheme {
        self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn expected_l(&self) -> f64 {
        self.expected_l
    }

    /// `(L, S)` of a sample given by values.
    pub fn s_of_values(&self, sample_values: &[f64]) -> Result<(f64, f64)> {
        let l = l_statistic(self.weights, sample_values)?;
        Ok((l, self.center(l)))
    }

    fn center(&self, l: f64) -> f64 {
        (self.n() as f64).sqrt() * (l - self.expected_l)
    }

    /// `L` of a sample given by population indices in increasing order.
    ///
    /// Since the population is sorted, increasing indices give the order
    /// statistics directly. No validation is done here.
    pub fn l_of_sorted_indices(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.n());
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let x = self.pop.values();
        compensated_sum(self.weights.c().iter().zip(idx).map(|(c, &i)| c * x[i])) / self.n() as f64
    }

    pub fn s_of_sorted_indices(&self, idx: &[usize]) -> f64 {
        self.center(self.l_of_sorted_indices(idx))
    }

    /// `S` of a sample of population indices in any order.
    pub fn s_of_indices(&self, idx: &[usize]) -> f64 {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.s_of_sorted_indices(&sorted)
    }

    pub(crate) fn validate_indices(&self, idx: &[usize], expected_len: usize) -> Result<Vec<usize>> {
        if idx.len() != expected_len {
            return domain(format!("expected {expected_len} sample indices, got {}", idx.len()));
        }
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        if let Some(&bad) = sorted.iter().find(|&&i| i >= self.pop.len()) {
            return domain(format!("index {bad} outside population of size {}", self.pop.len()));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return domain("sample indices must be distinct");
        }
        Ok(sorted)
    }

    /// `L`, `S`, `U1` and `R1` of a sample given by distinct population indices.
    pub fn evaluate(&self, decomposition: &HoeffdingDecomposition, idx: &[usize]) -> Result<SampleEvaluation> {
        if decomposition.g1.len() != self.pop.len() || decomposition.n != self.n() {
            return domain("decomposition was built for a different population or sample size");
        }
        let sorted = self.validate_indices(idx, self.n())?;
        let l = self.l_of_sorted_indices(&sorted);
        let s = self.center(l);
        let u1 = decomposition.u1(&sorted);
        Ok(SampleEvaluation { l, s, u1, r1: s - u1 })
    }
}

/// `S = sqrt(n) (L - E L)` for a sample given by values.
pub fn s_statistic(pop: &Population, w: &WeightScheme, sample_values: &[f64]) -> Result<(f64, f64)> {
    LStatistic::new(pop, w)?.s_of_values(sample_values)
}

/// Linear part `g1` of the Hoeffding decomposition `S = U1 + R1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingDecomposition {
    /// `g1(x_k)` for each population position `k` (sorted order).
    pub g1: Vec<f64>,
    /// `E g1^2(X_1) = (1/N) sum_k g1(x_k)^2`.
    pub sigma1_sq: f64,
    pub n: usize,
    pub expected_l: f64,
}

impl HoeffdingDecomposition {
    pub fn u1(&self, idx: &[usize]) -> f64 {
        compensated_sum(idx.iter().map(|&i| self.g1[i]))
    }

    pub fn max_abs(&self) -> f64 {
        self.g1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds the `g1` table.
///
/// With `A_i = sum_j c_j C(i-1, j-1) C(N-i-1, n-j) / C(N-2, n-1)` and spacings
/// `d_i = x_{i+1} - x_i`,
/// `g1(x_k) = -n^{-1/2} (sum_{i>=k} A_i d_i - (1/N) sum_i i A_i d_i)`,
/// evaluated with one suffix sum in O(N n).
pub fn g1_table(pop: &Population, w: &WeightScheme) -> Result<HoeffdingDecomposition> {
    let n = w.n();
    check_sizes(pop, n)?;
    let big_n = pop.len();
    let x = pop.values();
    let c = w.c();
    let fb = FloatBinomials::new(big_n);

    // terms[i - 1] = A_i d_i for i = 1..N-1
    let terms: Vec<f64> = (1..big_n)
        .into_par_iter()
        .map(|i| {
            let gap = x[i] - x[i - 1];
            if gap == 0.0 {
                return 0.0;
            }
            let lo = (n + i + 1).saturating_sub(big_n).max(1);
            let hi = n.min(i);
            let a = compensated_sum((lo..=hi).map(|j| {
                c[j - 1] * fb.ratio(&[(i - 1, j - 1), (big_n - i - 1, n - j)], &[(big_n - 2, n - 1)])
            }));
            a * gap
        })
        .collect();

    let centre = compensated_sum(terms.iter().enumerate().map(|(k, t)| (k + 1) as f64 * t)) / big_n as f64;
    let scale = -1.0 / (n as f64).sqrt();
    let mut g1 = vec![0.0; big_n];
    let mut suffix = CompensatedSum::new();
    g1[big_n - 1] = scale * (0.0 - centre);
    for k in (1..big_n).rev() {
        suffix.add(terms[k - 1]);
        g1[k - 1] = scale * (suffix.value() - centre);
    }
    let sigma1_sq = compensated_sum(g1.iter().map(|g| g * g)) / big_n as f64;
    Ok(HoeffdingDecomposition {
        g1,
        sigma1_sq,
        n,
        expected_l: expected_l(pop, w)?,
    })
}

/// Exact `E Delta^2_{pos:n+2}`, the second moment of the `pos`-th spacing of
/// a size-`(n+2)` sample.
pub fn spacing_sq_moment(pop: &Population, n: usize, pos: usize) -> Result<f64> {
    let big_n = pop.len();
    if n + 2 > big_n {
        return domain(format!("spacing moment needs n + 2 <= N, got n = {n}, N = {big_n}"));
    }
    if !(1 <= pos && pos <= n + 1) {
        return domain(format!("spacing position must lie in 1..={}, got {pos}", n + 1));
    }
    let x = pop.values();
    let fb = FloatBinomials::new(big_n);
    Ok(compensated_sum((pos..big_n).flat_map(|l| {
        let fb = &fb;
        (l + 1..=big_n).map(move |m| {
            let d = x[m - 1] - x[l - 1];
            d * d * fb.ratio(&[(l - 1, pos - 1), (big_n - m, n + 1 - pos)], &[(big_n, n + 2)])
        })
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightFunction;

    fn pop(v: &[f64]) -> Population {
        Population::new(v.to_vec()).unwrap()
    }

    #[test]
    fn l_statistic_examples() {
        let mean = WeightScheme::from_function(WeightFunction::Constant, 3).unwrap();
        assert_eq!(l_statistic(&mean, &[3.0, 1.0, 2.0]).unwrap(), 2.0);
        let trim = WeightScheme::trimmed(0.25, 0.75, 4).unwrap();
        assert_eq!(l_statistic(&trim, &[0.0, 10.0, 20.0, 100.0]).unwrap(), 15.0);
        let max = WeightScheme::explicit(vec![0.0, 2.0]).unwrap();
        assert_eq!(l_statistic(&max, &[7.0, -3.0]).unwrap(), 7.0);
        assert!(l_statistic(&max, &[1.0]).is_err());
    }

    #[test]
    fn expected_l_examples() {
        let p = pop(&[0.0, 1.0, 2.0]);
        let max = WeightScheme::explicit(vec![0.0, 2.0]).unwrap();
        assert!((expected_l(&p, &max).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        let one = WeightScheme::explicit(vec![1.0]).unwrap();
        assert_eq!(expected_l(&pop(&[0.0, 1.0]), &one).unwrap(), 0.5);
        let q = pop(&[0.3, -1.2, 4.4, 2.0, 0.0]);
        let mean = WeightScheme::from_function(WeightFunction::Constant, 3).unwrap();
        assert!((expected_l(&q, &mean).unwrap() - q.mean()).abs() < 1e-15);
        let too_big = WeightScheme::from_function(WeightFunction::Constant, 5).unwrap();
        assert!(expected_l(&q, &too_big).is_err());
    }

    #[test]
    fn s_statistic_examples() {
        let p = pop(&[0.0, 1.0, 2.0]);
        let mean = WeightScheme::from_function(WeightFunction::Constant, 2).unwrap();
        assert!(s_statistic(&p, &mean, &[0.0, 2.0]).unwrap().1.abs() < 1e-15);
        let max = WeightScheme::explicit(vec![0.0, 2.0]).unwrap();
        let (_, s) = s_statistic(&p, &max, &[1.0, 2.0]).unwrap();
        assert!((s - 2f64.sqrt() / 3.0).abs() < 1e-15);
        let flat = pop(&[3.0; 4]);
        assert_eq!(s_statistic(&flat, &mean, &[3.0, 3.0]).unwrap().1, 0.0);
    }

    #[test]
    fn g1_examples() {
        let one = WeightScheme::explicit(vec![1.0]).unwrap();
        let d = g1_table(&pop(&[0.0, 1.0]), &one).unwrap();
        assert_eq!(d.g1, vec![-0.5, 0.5]);
        assert_eq!(d.sigma1_sq, 0.25);

        let p = pop(&[0.0, 0.0, 1.0]);
        let max = WeightScheme::explicit(vec![0.0, 2.0]).unwrap();
        let d = g1_table(&p, &max).unwrap();
        let r2 = 2f64.sqrt();
        for (got, want) in d.g1.iter().zip([-r2 / 3.0, -r2 / 3.0, 2.0 * r2 / 3.0]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn evaluate_examples() {
        let p = pop(&[0.0, 0.0, 1.0]);
        let max = WeightScheme::explicit(vec![0.0, 2.0]).unwrap();
        let stat = LStatistic::new(&p, &max).unwrap();
        let d = g1_table(&p, &max).unwrap();
        let e = stat.evaluate(&d, &[0, 2]).unwrap();
        let r2 = 2f64.sqrt();
        assert!((e.u1 - r2 / 3.0).abs() < 1e-15);
        assert!((e.s - r2 / 3.0).abs() < 1e-15);
        assert!(e.r1.abs() < 1e-15);
        assert!(stat.evaluate(&d, &[0, 0]).is_err());
        assert!(stat.evaluate(&d, &[0, 3]).is_err());
        assert!(stat.evaluate(&d, &[0]).is_err());

        let flat = pop(&[2.0; 5]);
        let w = WeightScheme::from_function(WeightFunction::Gini, 3).unwrap();
        let stat = LStatistic::new(&flat, &w).unwrap();
        let d = g1_table(&flat, &w).unwrap();
        let e = stat.evaluate(&d, &[4, 1, 2]).unwrap();
        assert_eq!((e.s, e.u1, e.r1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn spacing_moment_examples() {
        let p = pop(&[0.0, 0.7, 2.0]);
        assert!((spacing_sq_moment(&p, 1, 1).unwrap() - 0.49).abs() < 1e-15);
        assert!(spacing_sq_moment(&p, 2, 1).is_err());
        assert!(spacing_sq_moment(&pop(&[0.0, 1.0, 2.0, 3.0]), 1, 3).is_err());

        let big_n = 9usize;
        let eq = Population::new((0..big_n).map(|k| k as f64 / big_n as f64).collect::<Vec<_>>()).unwrap();
        for n in 1..=big_n - 2 {
            let nf = n as f64;
            let nn = big_n as f64;
            let want = (nn + 1.0) * (2.0 * nn - nf) / ((nf + 3.0) * (nf + 4.0)) / (nn * nn);
            for pos in 1..=n + 1 {
                let got = spacing_sq_moment(&eq, n, pos).unwrap();
                assert!((got - want).abs() < 1e-14, "n={n} pos={pos}: {got} vs {want}");
            }
        }
    }
}
