//! Seeded simple random sampling without replacement and the difference
//! operators on extended samples.
//!
//! Every draw is keyed by an [`RngSpec`]: a ChaCha8 generator seeded from the
//! 64-bit `seed` and switched to the 64-bit `stream`. Replicate `r` of any
//! Monte Carlo run uses stream `r`, so results do not depend on how the
//! replicates are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::lstat::LStatistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Population indices of one draw, in the order they were drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleDraw {
    pub indices: Vec<usize>,
}

impl SampleDraw {
    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }
}

/// Partial Fisher-Yates: the first `n` entries of a shuffled `0..N`.
///
/// The returned order is itself uniformly random, so designated positions of
/// an extended sample can be read off directly.
pub fn draw_indices<R: Rng + ?Sized>(pop_size: usize, n: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..pop_size).collect();
    for i in 0..n {
        let j = rng.random_range(i..pop_size);
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool
}

pub fn srswor(pop_size: usize, n: usize, rng: RngSpec) -> Result<SampleDraw> {
    if n == 0 || n >= pop_size {
        return domain(format!("sampling needs 1 <= n < N, got n = {n}, N = {pop_size}"));
    }
    Ok(SampleDraw {
        indices: draw_indices(pop_size, n, &mut rng.rng()),
    })
}

/// Draws an extended sample of `size` distinct indices; unlike [`srswor`] the
/// whole population may be drawn.
pub fn extended_draw(pop_size: usize, size: usize, rng: RngSpec) -> Result<SampleDraw> {
    if size == 0 || size > pop_size {
        return domain(format!("extended draw of {size} units from N = {pop_size}"));
    }
    Ok(SampleDraw {
        indices: draw_indices(pop_size, size, &mut rng.rng()),
    })
}

fn s_without(stat: &LStatistic<'_>, ext: &[usize], drop: [usize; 2], scratch: &mut Vec<usize>) -> f64 {
    scratch.clear();
    scratch.extend(
        ext.iter()
            .enumerate()
            .filter(|(k, _)| !drop.contains(k))
            .map(|(_, &i)| i),
    );
    scratch.sort_unstable();
    stat.s_of_sorted_indices(scratch)
}

/// `S(X \ {X_{n+1}}) - S(X \ {X_1})` for `ext = (X_1, ..., X_{n+1})`.
///
/// `ext` must hold `n + 1` distinct indices; this is not checked.
pub fn d1_unchecked(stat: &LStatistic<'_>, ext: &[usize], scratch: &mut Vec<usize>) -> f64 {
    let last = ext.len() - 1;
    s_without(stat, ext, [last, last], scratch) - s_without(stat, ext, [0, 0], scratch)
}

/// Second difference over the designated positions `1, 2, n+1, n+2` of
/// `ext = (X_1, ..., X_{n+2})`:
/// `S(X \ {X_{n+1}, X_{n+2}}) - S(X \ {X_1, X_{n+2}}) - S(X \ {X_2, X_{n+1}}) + S(X \ {X_1, X_2})`.
///
/// `ext` must hold `n + 2` distinct indices with `n >= 2`; this is not checked.
pub fn d2_unchecked(stat: &LStatistic<'_>, ext: &[usize], scratch: &mut Vec<usize>) -> f64 {
    let (a, b) = (0, 1);
    let (p, q) = (ext.len() - 2, ext.len() - 1);
    s_without(stat, ext, [p, q], scratch) - s_without(stat, ext, [a, q], scratch)
        - s_without(stat, ext, [b, p], scratch)
        + s_without(stat, ext, [a, b], scratch)
}

pub fn d1_difference(stat: &LStatistic<'_>, extended_indices: &[usize]) -> Result<f64> {
    stat.validate_indices(extended_indices, stat.n() + 1)?;
    Ok(d1_unchecked(stat, extended_indices, &mut Vec::new()))
}

pub fn d2_difference(stat: &LStatistic<'_>, extended_indices: &[usize]) -> Result<f64> {
    if stat.n() < 2 {
        return domain("second difference needs n >= 2 (four distinct designated positions)");
    }
    stat.validate_indices(extended_indices, stat.n() + 2)?;
    Ok(d2_unchecked(stat, extended_indices, &mut Vec::new()))
}
