//! Binomial coefficients and the hypergeometric placement laws built on them.
//!
//! Two numeric paths are kept side by side. Exact unbounded integers back
//! the identity checks and every population of size at most
//! [`EXACT_MAX_N`]; above that threshold ratios of binomials are evaluated in
//! log space from a table of `ln k!`. In both paths `C(a, b) = 0` for `a < b`.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// Largest population size for which floating probabilities are derived from
/// exact integer binomials instead of log-gamma.
pub const EXACT_MAX_N: usize = 200;

/// Pascal's triangle in unbounded integers.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    max_n: usize,
    rows: Vec<Vec<BigUint>>,
    zero: BigUint,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        for a in 0..=max_n {
            let mut row = Vec::with_capacity(a + 1);
            row.push(BigUint::one());
            for b in 1..a {
                let prev = &rows[a - 1];
                row.push(&prev[b - 1] + &prev[b]);
            }
            if a > 0 {
                row.push(BigUint::one());
            }
            rows.push(row);
        }
        Self {
            max_n,
            rows,
            zero: BigUint::zero(),
        }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// `C(a, b)`, zero when `a < b`.
    pub fn get(&self, a: usize, b: usize) -> Result<&BigUint> {
        if a > self.max_n {
            return domain(format!("C({a}, {b}) exceeds table size {}", self.max_n));
        }
        Ok(if b > a { &self.zero } else { &self.rows[a][b] })
    }

    /// Like [`get`](Self::get) but as a signed integer, convenient for
    /// rational arithmetic.
    pub fn get_int(&self, a: usize, b: usize) -> Result<BigInt> {
        self.get(a, b).map(|v| BigInt::from(v.clone()))
    }
}

fn shared_exact_table() -> &'static BinomialTable {
    static TABLE: OnceLock<BinomialTable> = OnceLock::new();
    TABLE.get_or_init(|| BinomialTable::new(EXACT_MAX_N))
}

fn shared_rounded_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        shared_exact_table()
            .rows
            .iter()
            .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::INFINITY)).collect())
            .collect()
    })
}

fn check_nonneg(a: i64, b: i64) -> Result<(u64, u64)> {
    if a < 0 || b < 0 {
        return domain(format!("binomial arguments must be non-negative, got ({a}, {b})"));
    }
    Ok((a as u64, b as u64))
}

/// Exact binomial coefficient; zero when `a < b`.
pub fn binom(a: i64, b: i64) -> Result<BigUint> {
    let (a, b) = check_nonneg(a, b)?;
    if b > a {
        return Ok(BigUint::zero());
    }
    let b = b.min(a - b);
    let mut acc = BigUint::one();
    for k in 0..b {
        acc *= a - k;
        acc /= k + 1;
    }
    Ok(acc)
}

/// `ln C(a, b)`; `-inf` encodes `C(a, b) = 0`.
pub fn log_binom(a: i64, b: i64) -> Result<f64> {
    let (a, b) = check_nonneg(a, b)?;
    Ok(ln_choose(a, b))
}

fn ln_choose(a: u64, b: u64) -> f64 {
    if b > a {
        return f64::NEG_INFINITY;
    }
    if b == 0 || b == a {
        return 0.0;
    }
    ln_gamma(a as f64 + 1.0) - ln_gamma(b as f64 + 1.0) - ln_gamma((a - b) as f64 + 1.0)
}

/// Floating evaluation of products and ratios of binomial coefficients with
/// arguments up to a fixed bound.
#[derive(Debug, Clone)]
pub struct FloatBinomials {
    max_n: usize,
    ln_fact: Option<Vec<f64>>,
}

impl FloatBinomials {
    pub fn new(max_n: usize) -> Self {
        let ln_fact = (max_n > EXACT_MAX_N)
            .then(|| (0..=max_n).map(|k| ln_gamma(k as f64 + 1.0)).collect());
        Self { max_n, ln_fact }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// `ln C(a, b)` with the zero convention mapped to `-inf`.
    pub fn ln_choose(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a <= self.max_n);
        if b > a {
            return f64::NEG_INFINITY;
        }
        match &self.ln_fact {
            Some(t) => t[a] - t[b] - t[a - b],
            None => shared_rounded_table()[a][b].ln(),
        }
    }

    /// `prod C(num) / prod C(den)`; exactly zero when any numerator vanishes.
    pub fn ratio(&self, num: &[(usize, usize)], den: &[(usize, usize)]) -> f64 {
        if num.iter().any(|&(a, b)| b > a) {
            return 0.0;
        }
        match &self.ln_fact {
            Some(t) => {
                let lc = |&(a, b): &(usize, usize)| t[a] - t[b] - t[a - b];
                let s: f64 = num.iter().map(lc).sum::<f64>() - den.iter().map(lc).sum::<f64>();
                s.exp()
            }
            None => {
                let table = shared_rounded_table();
                let p: f64 = num.iter().map(|&(a, b)| table[a][b]).product();
                let q: f64 = den.iter().map(|&(a, b)| table[a][b]).product();
                p / q
            }
        }
    }
}

fn check_order_index(pop_size: usize, n: usize, j: usize) -> Result<()> {
    if !(1 <= j && j <= n && n < pop_size) {
        return domain(format!(
            "order statistic law needs 1 <= j <= n < N, got N={pop_size}, n={n}, j={j}"
        ));
    }
    Ok(())
}

/// Law of the population index of the `j`-th order statistic of a size-`n`
/// sample: entry `i - 1` is `C(i-1, j-1) C(N-i, n-j) / C(N, n)`.
pub fn order_index_pmf(pop_size: usize, n: usize, j: usize) -> Result<Vec<f64>> {
    check_order_index(pop_size, n, j)?;
    let fb = FloatBinomials::new(pop_size);
    Ok((1..=pop_size)
        .map(|i| fb.ratio(&[(i - 1, j - 1), (pop_size - i, n - j)], &[(pop_size, n)]))
        .collect())
}

/// Exact rational form of [`order_index_pmf`].
pub fn order_index_pmf_exact(
    table: &BinomialTable,
    pop_size: usize,
    n: usize,
    j: usize,
) -> Result<Vec<BigRational>> {
    check_order_index(pop_size, n, j)?;
    let den = table.get_int(pop_size, n)?;
    (1..=pop_size)
        .map(|i| {
            let num = table.get_int(i - 1, j - 1)? * table.get_int(pop_size - i, n - j)?;
            Ok(BigRational::new(num, den.clone()))
        })
        .collect()
}

fn check_pair(upper: usize, i: usize, j: usize) -> Result<()> {
    if !(1 <= i && i < j && j <= upper) {
        return domain(format!("rank pair needs 1 <= i < j <= {upper}, got ({i}, {j})"));
    }
    Ok(())
}

/// Probability that the two designated units of an `(n+1)`-extended sample
/// occupy ranks `i < j`: `1 / C(n+1, 2)`.
pub fn rank_pair_prob_1(n: usize, i: usize, j: usize) -> Result<f64> {
    check_pair(n + 1, i, j)?;
    Ok(2.0 / (n as f64 * (n as f64 + 1.0)))
}

pub fn rank_pair_prob_1_exact(n: usize, i: usize, j: usize) -> Result<BigRational> {
    check_pair(n + 1, i, j)?;
    let pairs = BigInt::from(n) * BigInt::from(n + 1) / BigInt::from(2);
    Ok(BigRational::new(BigInt::one(), pairs))
}

fn check_rank_pair_2(n: usize, i: usize, j: usize) -> Result<()> {
    if n < 2 {
        return domain(format!("second-order rank law needs n >= 2, got {n}"));
    }
    check_pair(n + 2, i, j)
}

/// Probability that, among four designated units of an `(n+2)`-extended
/// sample, the second and third smallest ranks are `i < j`:
/// `(i-1)(n+2-j) / C(n+2, 4)`.
pub fn rank_pair_prob_2(n: usize, i: usize, j: usize) -> Result<f64> {
    check_rank_pair_2(n, i, j)?;
    let m = (n + 2) as f64;
    let c4 = m * (m - 1.0) * (m - 2.0) * (m - 3.0) / 24.0;
    Ok(((i - 1) * (n + 2 - j)) as f64 / c4)
}

pub fn rank_pair_prob_2_exact(n: usize, i: usize, j: usize) -> Result<BigRational> {
    check_rank_pair_2(n, i, j)?;
    let m = BigInt::from(n + 2);
    let c4 = &m * (&m - 1) * (&m - 2) * (&m - 3) / BigInt::from(24);
    Ok(BigRational::new(BigInt::from((i - 1) * (n + 2 - j)), c4))
}

fn check_placement(pop_size: usize, n_plus: usize, i: usize, j: usize, l: usize, m: usize) -> Result<()> {
    check_pair(n_plus, i, j)?;
    if n_plus > pop_size {
        return domain(format!("extended sample size {n_plus} exceeds N={pop_size}"));
    }
    if !(1 <= l && l < m && m <= pop_size) {
        return domain(format!("placement needs 1 <= l < m <= {pop_size}, got ({l}, {m})"));
    }
    Ok(())
}

/// Probability that the order statistics of ranks `i < j` in a size-`n_plus`
/// sample sit at population positions `l < m`:
/// `C(l-1, i-1) C(m-l-1, j-i-1) C(N-m, n_plus-j) / C(N, n_plus)`.
pub fn placement_prob(
    pop_size: usize,
    n_plus: usize,
    i: usize,
    j: usize,
    l: usize,
    m: usize,
) -> Result<f64> {
    check_placement(pop_size, n_plus, i, j, l, m)?;
    let fb = FloatBinomials::new(pop_size);
    Ok(fb.ratio(
        &[(l - 1, i - 1), (m - l - 1, j - i - 1), (pop_size - m, n_plus - j)],
        &[(pop_size, n_plus)],
    ))
}

pub fn placement_prob_exact(
    table: &BinomialTable,
    pop_size: usize,
    n_plus: usize,
    i: usize,
    j: usize,
    l: usize,
    m: usize,
) -> Result<BigRational> {
    check_placement(pop_size, n_plus, i, j, l, m)?;
    let num = table.get_int(l - 1, i - 1)?
        * table.get_int(m - l - 1, j - i - 1)?
        * table.get_int(pop_size - m, n_plus - j)?;
    Ok(BigRational::new(num, table.get_int(pop_size, n_plus)?))
}
