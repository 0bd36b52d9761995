//! Test populations: deterministic quantile grids and a two-point stress case.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use finpop_lstat::{Error, Population, Result};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq)]
pub enum PopulationSpec {
    /// `x_k = (k - 1) / N`.
    Equispaced,
    /// Quantile grids `x_k = Q(k / (N + 1))`.
    Uniform,
    Normal,
    Exponential,
    Pareto { alpha: f64 },
    /// `floor(split N)` units at `lo`, the rest at `hi`.
    TwoPoint { lo: f64, hi: f64, split: f64 },
    File(PathBuf),
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn numbers(params: &str, want: usize, kind: &str) -> Result<Vec<f64>> {
    let v = params
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad(format!("{kind}: bad parameter {p:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != want || v.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{kind} takes {want} finite parameter(s), got {params:?}")));
    }
    Ok(v)
}

impl FromStr for PopulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p)),
            None => (s, None),
        };
        let kind = kind.strip_suffix("-quantile").unwrap_or(kind);
        let none = |spec: PopulationSpec| match params {
            None => Ok(spec),
            Some(p) => Err(bad(format!("{kind} takes no parameters, got {p:?}"))),
        };
        match kind {
            "equispaced" => none(PopulationSpec::Equispaced),
            "uniform" => none(PopulationSpec::Uniform),
            "normal" => none(PopulationSpec::Normal),
            "exponential" => none(PopulationSpec::Exponential),
            "pareto" => {
                let v = numbers(params.unwrap_or(""), 1, "pareto")?;
                if v[0] <= 0.0 {
                    return Err(bad("pareto shape must be positive"));
                }
                Ok(PopulationSpec::Pareto { alpha: v[0] })
            }
            "two-point" => {
                let v = numbers(params.unwrap_or(""), 3, "two-point")?;
                let (lo, hi, split) = (v[0], v[1], v[2]);
                if lo >= hi || !(split > 0.0 && split < 1.0) {
                    return Err(bad("two-point needs lo < hi and 0 < split < 1"));
                }
                Ok(PopulationSpec::TwoPoint { lo, hi, split })
            }
            "file" => match params {
                Some(p) if !p.trim().is_empty() => Ok(PopulationSpec::File(PathBuf::from(p.trim()))),
                _ => Err(bad("file: needs a path")),
            },
            _ => Err(bad(format!("unknown population kind {kind:?}"))),
        }
    }
}

impl fmt::Display for PopulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationSpec::Equispaced => write!(f, "equispaced"),
            PopulationSpec::Uniform => write!(f, "uniform"),
            PopulationSpec::Normal => write!(f, "normal"),
            PopulationSpec::Exponential => write!(f, "exponential"),
            PopulationSpec::Pareto { alpha } => write!(f, "pareto:{alpha}"),
            PopulationSpec::TwoPoint { lo, hi, split } => write!(f, "two-point:{lo},{hi},{split}"),
            PopulationSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl PopulationSpec {
    pub fn is_file(&self) -> bool {
        matches!(self, PopulationSpec::File(_))
    }

    /// Builds the population. File populations ignore `size` unless it is
    /// given, in which case it must match.
    pub fn generate(&self, size: Option<usize>) -> Result<Population> {
        if let PopulationSpec::File(path) = self {
            let pop = Population::from_file(path)?;
            if let Some(n) = size.filter(|&n| n != pop.len()) {
                return Err(bad(format!("{} holds {} values, asked for {n}", path.display(), pop.len())));
            }
            return Ok(pop);
        }
        let Some(size) = size else {
            return Err(bad(format!("{self} needs a population size")));
        };
        if size < 2 {
            return Err(bad("populations need at least two units"));
        }
        let nf = size as f64;
        let grid = |q: &dyn Fn(f64) -> f64| (1..=size).map(|k| q(k as f64 / (nf + 1.0))).collect::<Vec<_>>();
        let values = match *self {
            PopulationSpec::Equispaced => (0..size).map(|k| k as f64 / nf).collect(),
            PopulationSpec::Uniform => grid(&|u| u),
            PopulationSpec::Normal => {
                let std = Normal::standard();
                grid(&|u| std.inverse_cdf(u))
            }
            PopulationSpec::Exponential => grid(&|u| -(-u).ln_1p()),
            PopulationSpec::Pareto { alpha } => grid(&|u| (1.0 - u).powf(-1.0 / alpha)),
            PopulationSpec::TwoPoint { lo, hi, split } => {
                let low = ((split * nf) * (1.0 + 1e-12)).floor() as usize;
                (0..size).map(|k| if k < low { lo } else { hi }).collect()
            }
            PopulationSpec::File(_) => unreachable!(),
        };
        Population::new(values)
    }
}
