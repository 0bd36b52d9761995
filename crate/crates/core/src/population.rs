//! The finite population and its descriptors.

use std::path::Path;

use crate::error::{domain, Error, Result};
use crate::numeric::compensated_sum;

/// Study values `x_1 <= ... <= x_N` of a finite population.
///
/// Values are sorted on construction; every index in this crate refers to
/// positions in this sorted order (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    values: Vec<f64>,
}

/// Smallest constant `C` with `|x_m - x_l| <= C N^-delta |m - l|` for all pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessProfile {
    pub delta: f64,
    pub c_min: f64,
    pub max_gap: f64,
}

impl Population {
    pub fn new(raw_values: impl Into<Vec<f64>>) -> Result<Self> {
        let mut values = raw_values.into();
        if values.len() < 2 {
            return domain(format!("population needs at least 2 values, got {}", values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return domain(format!("population value {bad} is not finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    /// Parses one decimal value per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(parse_value_lines(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.len() as f64
    }

    /// `Var X_1` of a uniform draw (divisor `N`).
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        compensated_sum(self.values.iter().map(|x| (x - mu) * (x - mu))) / self.len() as f64
    }

    /// `N^-2 sum_{l<m} (x_m - x_l)^2`, the pairwise form of the variance. O(N^2).
    pub fn pairwise_variance(&self) -> f64 {
        let x = &self.values;
        let s = compensated_sum(
            (0..x.len()).flat_map(|m| (0..m).map(move |l| (x[m] - x[l]) * (x[m] - x[l]))),
        );
        let n = self.len() as f64;
        s / (n * n)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `E X_1^2`.
    pub fn second_moment(&self) -> f64 {
        compensated_sum(self.values.iter().map(|x| x * x)) / self.len() as f64
    }

    pub fn is_constant(&self) -> bool {
        self.values[0] == self.values[self.len() - 1]
    }

    pub fn max_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Smallest admissible constant in the power-law smoothness condition.
    ///
    /// `(x_m - x_l) / (m - l)` averages the adjacent gaps between `l` and `m`,
    /// so the all-pairs maximum is the largest adjacent gap.
    pub fn smoothness_profile(&self, delta: f64) -> Result<SmoothnessProfile> {
        check_delta(delta)?;
        let max_gap = self.max_gap();
        Ok(SmoothnessProfile {
            delta,
            c_min: (self.len() as f64).powf(delta) * max_gap,
            max_gap,
        })
    }

    /// Returns `(x_N - x_1, sigma sqrt(2N))`; the range never exceeds the bound.
    pub fn range_check_nair_thomson(&self) -> (f64, f64) {
        let range = self.values[self.len() - 1] - self.values[0];
        (range, self.std_dev() * (2.0 * self.len() as f64).sqrt())
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.5 && delta <= 1.0) {
        return domain(format!("smoothness exponent must lie in (1/2, 1], got {delta}"));
    }
    Ok(())
}

/// One finite real per line; blank lines and lines starting with `#` are ignored.
pub fn parse_value_lines(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(k, line)| (k + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .map(|(k, line)| {
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("line {k}: cannot parse {line:?} as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("line {k}: value {line:?} is not finite")))
            }
        })
        .collect()
}
