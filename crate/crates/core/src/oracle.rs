//! Brute-force ground truth on small instances.
//!
//! Every quantity here is an exact average over all subsets (and, for the
//! difference operators, over all assignments of designated positions).
//! Subsets are enumerated in lexicographic order, split into blocks by their
//! smallest index; blocks run in parallel and are merged in block order, so
//! results are bit-stable.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::combinatorics::{binom, log_binom};
use crate::error::{domain, Error, Result};
use crate::lstat::{g1_table, LStatistic};
use crate::numeric::CompensatedSum;
use crate::population::Population;
use crate::weights::WeightScheme;

/// Maximum number of statistic evaluations an exact computation may perform.
pub const ENUMERATION_GUARD: u64 = 10_000_000;

/// A support point of the exact law of `S_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub s: f64,
    /// Number of subsets producing this value.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    /// Atoms sorted by value.
    pub atoms: Vec<Atom>,
    /// `C(N, n)`; atom probabilities are `count / total`.
    pub total: u64,
    pub expected_l: f64,
    /// `Var S_n`.
    pub var_s: f64,
}

impl ExactDistribution {
    pub fn probability(&self, atom: &Atom) -> Ratio<u64> {
        Ratio::new(atom.count, self.total)
    }

    /// `P{S_n <= x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        let below: u64 = self.atoms.iter().take_while(|a| a.s <= x).map(|a| a.count).sum();
        below as f64 / self.total as f64
    }

    /// `F_n(x) = P{S_n <= x sigma_n}`.
    pub fn normalized_cdf(&self, x: f64) -> f64 {
        self.cdf(x * self.var_s.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMoments {
    pub e_u1: f64,
    pub cov_u1_r1: f64,
    pub e_r1_sq: f64,
    pub var_s: f64,
}

pub(crate) fn count_subsets(pop_size: usize, k: usize) -> u64 {
    let (a, b) = (pop_size as i64, k as i64);
    // anything past ~1e18 is far beyond the guard; skip the exact product
    if log_binom(a, b).unwrap_or(f64::INFINITY) > 41.0 {
        return u64::MAX;
    }
    binom(a, b).ok().and_then(|v| v.to_u64()).unwrap_or(u64::MAX)
}

fn guard(what: &str, evaluations: u128) -> Result<()> {
    if evaluations > ENUMERATION_GUARD as u128 {
        return Err(Error::Resource(format!(
            "{what} needs {evaluations} evaluations, guard is {ENUMERATION_GUARD}"
        )));
    }
    Ok(())
}

/// Calls `f` on every increasing `k`-subset of `0..pop_size`, in parallel
/// blocks keyed by the smallest element; returns per-block accumulators in
/// lexicographic block order.
fn for_each_subset<A, I, F>(pop_size: usize, k: usize, init: I, f: F) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[usize]) + Sync,
{
    debug_assert!(1 <= k && k <= pop_size);
    (0..=pop_size - k)
        .into_par_iter()
        .map(|first| {
            let mut acc = init();
            let mut idx: Vec<usize> = (first..first + k).collect();
            loop {
                f(&mut acc, &idx);
                // advance positions 1..k lexicographically, keeping idx[0] fixed
                let mut pos = k;
                loop {
                    if pos == 1 {
                        return acc;
                    }
                    pos -= 1;
                    if idx[pos] < pop_size - (k - pos) {
                        break;
                    }
                }
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
            }
        })
        .collect()
}

fn merge<const K: usize>(blocks: &[[CompensatedSum; K]]) -> [f64; K] {
    let mut out = [CompensatedSum::new(); K];
    for b in blocks {
        for (o, v) in out.iter_mut().zip(b) {
            o.add(v.value());
        }
    }
    out.map(|s| s.value())
}

fn check_sizes(pop: &Population, w: &WeightScheme) -> Result<usize> {
    let n = w.n();
    if n == 0 || n >= pop.len() {
        return domain(format!("sample size must satisfy 1 <= n < N, got n = {n}, N = {}", pop.len()));
    }
    Ok(n)
}

/// `E L_n` as the plain average over all subsets.
pub fn enumerated_expected_l(pop: &Population, w: &WeightScheme) -> Result<f64> {
    let n = check_sizes(pop, w)?;
    let total = count_subsets(pop.len(), n);
    guard("exact distribution", total as u128)?;
    let stat = LStatistic::with_expected_l(pop, w, 0.0)?;
    let blocks = for_each_subset(pop.len(), n, || [CompensatedSum::new()], |acc, idx| {
        acc[0].add(stat.l_of_sorted_indices(idx))
    });
    Ok(merge(&blocks)[0] / total as f64)
}

/// Exact law of `S_n` over all `C(N, n)` samples.
pub fn enumerate_distribution(pop: &Population, w: &WeightScheme) -> Result<ExactDistribution> {
    let n = check_sizes(pop, w)?;
    let expected_l = enumerated_expected_l(pop, w)?;
    let total = count_subsets(pop.len(), n);
    let stat = LStatistic::with_expected_l(pop, w, expected_l)?;
    let blocks = for_each_subset(pop.len(), n, Vec::new, |acc: &mut Vec<f64>, idx| {
        acc.push(stat.s_of_sorted_indices(idx))
    });
    let mut values: Vec<f64> = blocks.into_iter().flatten().collect();

    let mut m = CompensatedSum::new();
    m.extend(values.iter().copied());
    let mean_s = m.value() / total as f64;
    let mut v = CompensatedSum::new();
    v.extend(values.iter().map(|s| (s - mean_s) * (s - mean_s)));
    let var_s = v.value() / total as f64;

    values.sort_by(f64::total_cmp);
    let mut atoms: Vec<Atom> = Vec::new();
    for s in values {
        match atoms.last_mut() {
            Some(a) if a.s == s => a.count += 1,
            _ => atoms.push(Atom { s, count: 1 }),
        }
    }
    Ok(ExactDistribution {
        atoms,
        total,
        expected_l,
        var_s,
    })
}

/// Exact `E U1`, `Cov(U1, R1)`, `E R1^2` and `Var S_n` over all samples.
pub fn exact_linear_moments(pop: &Population, w: &WeightScheme) -> Result<LinearMoments> {
    let n = check_sizes(pop, w)?;
    let total = count_subsets(pop.len(), n);
    guard("exact linear moments", total as u128)?;
    let expected_l = enumerated_expected_l(pop, w)?;
    let stat = LStatistic::with_expected_l(pop, w, expected_l)?;
    let dec = g1_table(pop, w)?;
    let blocks = for_each_subset(
        pop.len(),
        n,
        || [CompensatedSum::new(); 6],
        |acc, idx| {
            let s = stat.s_of_sorted_indices(idx);
            let u = dec.u1(idx);
            let r = s - u;
            acc[0].add(u);
            acc[1].add(r);
            acc[2].add(u * r);
            acc[3].add(r * r);
            acc[4].add(s);
            acc[5].add(s * s);
        },
    );
    let t = total as f64;
    let [su, sr, sur, srr, ss, sss] = merge(&blocks);
    let (e_u, e_r, e_s) = (su / t, sr / t, ss / t);
    Ok(LinearMoments {
        e_u1: e_u,
        cov_u1_r1: sur / t - e_u * e_r,
        e_r1_sq: srr / t,
        var_s: sss / t - e_s * e_s,
    })
}

/// Exact `E (D1 S_n)^2` over `(n+1)`-subsets and ordered choices of the two
/// designated units.
pub fn exact_d1_moment(pop: &Population, w: &WeightScheme) -> Result<f64> {
    let n = check_sizes(pop, w)?;
    let k = n + 1;
    let subsets = count_subsets(pop.len(), k);
    guard("exact E(D1)^2", subsets as u128 * k as u128)?;
    let stat = LStatistic::new(pop, w)?;
    let blocks = for_each_subset(
        pop.len(),
        k,
        || ([CompensatedSum::new()], Vec::new(), Vec::new()),
        |(acc, drop_one, scratch): &mut ([CompensatedSum; 1], Vec<f64>, Vec<usize>), idx| {
            drop_one.clear();
            for skip in 0..k {
                scratch.clear();
                scratch.extend(idx.iter().enumerate().filter(|&(q, _)| q != skip).map(|(_, &i)| i));
                drop_one.push(stat.s_of_sorted_indices(scratch));
            }
            // ordered pairs (first, last); D1 is antisymmetric so each
            // unordered pair counts twice
            for a in 0..k {
                for b in a + 1..k {
                    let d = drop_one[b] - drop_one[a];
                    acc[0].add(2.0 * d * d);
                }
            }
        },
    );
    let blocks: Vec<[CompensatedSum; 1]> = blocks.into_iter().map(|b| b.0).collect();
    Ok(merge(&blocks)[0] / (subsets as f64 * (k * (k - 1)) as f64))
}

/// `n_* = min(n, N - n)`.
pub fn n_star(pop_size: usize, n: usize) -> usize {
    n.min(pop_size - n)
}

/// Exact `delta_2 = E (n_* D2 S_n)^2` over `(n+2)`-subsets and all ordered
/// assignments of the four designated positions.
///
/// Defined for `2 <= n <= N - 2`; outside that range the four designated
/// units of an extended sample do not exist.
pub fn exact_delta2(pop: &Population, w: &WeightScheme) -> Result<f64> {
    let n = check_sizes(pop, w)?;
    if n < 2 || n + 2 > pop.len() {
        return domain(format!(
            "delta_2 needs 2 <= n <= N - 2, got n = {n}, N = {}",
            pop.len()
        ));
    }
    let k = n + 2;
    let subsets = count_subsets(pop.len(), k);
    let pairs = (k * (k - 1) / 2) as u128;
    guard("exact delta_2", subsets as u128 * pairs)?;
    let stat = LStatistic::new(pop, w)?;
    let ns = n_star(pop.len(), n) as f64;
    let blocks = for_each_subset(
        pop.len(),
        k,
        || ([CompensatedSum::new()], vec![0.0; k * k], Vec::new()),
        |(acc, drop_two, scratch): &mut ([CompensatedSum; 1], Vec<f64>, Vec<usize>), idx| {
            for a in 0..k {
                for b in a + 1..k {
                    scratch.clear();
                    scratch.extend(
                        idx.iter()
                            .enumerate()
                            .filter(|&(q, _)| q != a && q != b)
                            .map(|(_, &i)| i),
                    );
                    let s = stat.s_of_sorted_indices(scratch);
                    drop_two[a * k + b] = s;
                    drop_two[b * k + a] = s;
                }
            }
            let rm = |a: usize, b: usize| drop_two[a * k + b];
            for p1 in 0..k {
                for p2 in (0..k).filter(|&v| v != p1) {
                    for q1 in (0..k).filter(|&v| v != p1 && v != p2) {
                        for q2 in (0..k).filter(|&v| v != p1 && v != p2 && v != q1) {
                            let d = rm(q1, q2) - rm(p1, q2) - rm(p2, q1) + rm(p1, p2);
                            acc[0].add(ns * ns * d * d);
                        }
                    }
                }
            }
        },
    );
    let blocks: Vec<[CompensatedSum; 1]> = blocks.into_iter().map(|b| b.0).collect();
    let tuples = (k * (k - 1) * (k - 2) * (k - 3)) as f64;
    Ok(merge(&blocks)[0] / (subsets as f64 * tuples))
}
