//! Weight sequences `c_1, ..., c_n` of an L-statistic.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::population::{check_delta, parse_value_lines};

/// Built-in weight functions `J` on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// `J = 1`, the sample mean.
    Constant,
    /// `J(u) = u`.
    Identity,
    /// `J(u) = 2u - 1`.
    Gini,
    /// `J(u) = (t2 - t1)^-1 1{t1 < u < t2}`.
    Trimmed { t1: f64, t2: f64 },
}

impl WeightFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            WeightFunction::Constant => 1.0,
            WeightFunction::Identity => u,
            WeightFunction::Gini => 2.0 * u - 1.0,
            WeightFunction::Trimmed { t1, t2 } => {
                if t1 < u && u < t2 {
                    1.0 / (t2 - t1)
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `J` is Lipschitz (hence Hölder of every order up to 1).
    pub fn is_lipschitz(&self) -> bool {
        !matches!(self, WeightFunction::Trimmed { .. })
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Constant => write!(f, "mean"),
            WeightFunction::Identity => write!(f, "identity"),
            WeightFunction::Gini => write!(f, "gini"),
            WeightFunction::Trimmed { t1, t2 } => write!(f, "trimmed-j:{t1},{t2}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Explicit,
    FromFunction,
    TrimmedIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Explicit,
    Function(WeightFunction),
    /// A caller-supplied closure, identified by name only.
    CustomFunction(String),
    TrimmedIndex { t1: f64, t2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    c: Vec<f64>,
    source: WeightSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    /// `max_j |c_j|`.
    pub sup_bound_a: f64,
    /// `max_{2<=p<=n} |c_p - c_{p-1}| (n+1)^delta`, measured on the grid only
    /// (a lower bound for the Hölder constant of `J`).
    pub holder_b_at_delta: f64,
    pub delta_used: f64,
}

/// `[t n]` with a small tolerance so that e.g. `0.29 * 100` floors to 29.
pub(crate) fn floor_product(t: f64, n: usize) -> usize {
    let v = t * n as f64;
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        v.floor() as usize
    }
}

/// Index range `(s, t) = ([t1 n] + 1, [t2 n])` kept by the trimmed mean, 1-based.
pub fn trim_bounds(t1: f64, t2: f64, n: usize) -> Result<(usize, usize)> {
    if !(0.0 < t1 && t1 < t2 && t2 < 1.0) {
        return domain(format!("trimming needs 0 < t1 < t2 < 1, got ({t1}, {t2})"));
    }
    if (n as f64) <= 1.0 / (t2 - t1) {
        return domain(format!(
            "trimmed mean needs n > 1/(t2 - t1) = {}, got n = {n}",
            1.0 / (t2 - t1)
        ));
    }
    let s = floor_product(t1, n) + 1;
    let t = floor_product(t2, n);
    if t < s {
        return domain(format!("trimming ({t1}, {t2}) keeps no order statistic at n = {n}"));
    }
    Ok((s, t))
}

impl WeightScheme {
    pub fn explicit(c: impl Into<Vec<f64>>) -> Result<Self> {
        let c = c.into();
        if c.is_empty() {
            return domain("weight sequence is empty");
        }
        if let Some(bad) = c.iter().find(|v| !v.is_finite()) {
            return domain(format!("weight {bad} is not finite"));
        }
        Ok(Self {
            c,
            source: WeightSource::Explicit,
        })
    }

    /// `c_j = J(j / (n + 1))` for an arbitrary closure.
    pub fn from_closure(name: &str, j: impl Fn(f64) -> f64, n: usize) -> Result<Self> {
        let c = grid_values(j, n)?;
        Ok(Self {
            c,
            source: WeightSource::CustomFunction(name.to_string()),
        })
    }

    pub fn from_function(j: WeightFunction, n: usize) -> Result<Self> {
        let c = grid_values(|u| j.eval(u), n)?;
        Ok(Self {
            c,
            source: WeightSource::Function(j),
        })
    }

    /// Index-based trimmed mean: `c_j = n / ([t2 n] - [t1 n])` on
    /// `[t1 n] + 1 <= j <= [t2 n]`, zero elsewhere.
    pub fn trimmed(t1: f64, t2: f64, n: usize) -> Result<Self> {
        let (s, t) = trim_bounds(t1, t2, n)?;
        let h = n as f64 / (t - s + 1) as f64;
        let c = (1..=n).map(|j| if (s..=t).contains(&j) { h } else { 0.0 }).collect();
        Ok(Self {
            c,
            source: WeightSource::TrimmedIndex { t1, t2 },
        })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }

    pub fn kind(&self) -> WeightKind {
        match self.source {
            WeightSource::Explicit => WeightKind::Explicit,
            WeightSource::Function(_) | WeightSource::CustomFunction(_) => WeightKind::FromFunction,
            WeightSource::TrimmedIndex { .. } => WeightKind::TrimmedIndex,
        }
    }

    /// Trimming proportions, for either trimmed representation.
    pub fn trimming(&self) -> Option<(f64, f64)> {
        match self.source {
            WeightSource::TrimmedIndex { t1, t2 }
            | WeightSource::Function(WeightFunction::Trimmed { t1, t2 }) => Some((t1, t2)),
            _ => None,
        }
    }

    /// The same scheme built for another sample size, when the source allows it.
    pub fn rebuild(&self, n: usize) -> Option<Result<Self>> {
        match self.source {
            WeightSource::Function(j) => Some(Self::from_function(j, n)),
            WeightSource::TrimmedIndex { t1, t2 } => Some(Self::trimmed(t1, t2, n)),
            WeightSource::Explicit | WeightSource::CustomFunction(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.c.iter().all(|&v| v == self.c[0])
    }

    pub fn sup_bound(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_increment(&self) -> f64 {
        self.c
            .windows(2)
            .fold(0.0, |m, w| m.max((w[1] - w[0]).abs()))
    }

    pub fn diagnostics(&self, delta: f64) -> Result<WeightDiagnostics> {
        check_delta(delta)?;
        Ok(WeightDiagnostics {
            sup_bound_a: self.sup_bound(),
            holder_b_at_delta: self.max_increment() * (self.n() as f64 + 1.0).powf(delta),
            delta_used: delta,
        })
    }
}

fn grid_values(j: impl Fn(f64) -> f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    (1..=n)
        .map(|k| {
            let u = k as f64 / (n as f64 + 1.0);
            let v = j(u);
            if v.is_finite() {
                Ok(v)
            } else {
                domain(format!("weight function is not finite at u = {u}"))
            }
        })
        .collect()
}

/// Textual weight descriptor as accepted on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightDescriptor {
    Mean,
    Identity,
    Gini,
    /// Index-based trimmed mean.
    Trimmed { t1: f64, t2: f64 },
    /// Trimmed mean through its weight function.
    TrimmedJ { t1: f64, t2: f64 },
    File(PathBuf),
}

impl WeightDescriptor {
    pub fn build(&self, n: usize) -> Result<WeightScheme> {
        match self {
            WeightDescriptor::Mean => WeightScheme::from_function(WeightFunction::Constant, n),
            WeightDescriptor::Identity => WeightScheme::from_function(WeightFunction::Identity, n),
            WeightDescriptor::Gini => WeightScheme::from_function(WeightFunction::Gini, n),
            WeightDescriptor::Trimmed { t1, t2 } => WeightScheme::trimmed(*t1, *t2, n),
            WeightDescriptor::TrimmedJ { t1, t2 } => {
                trim_bounds(*t1, *t2, n)?;
                WeightScheme::from_function(WeightFunction::Trimmed { t1: *t1, t2: *t2 }, n)
            }
            WeightDescriptor::File(path) => {
                let c = parse_value_lines(&std::fs::read_to_string(path)?)?;
                if c.len() != n {
                    return domain(format!(
                        "weight file {} holds {} weights, sample size is {n}",
                        path.display(),
                        c.len()
                    ));
                }
                WeightScheme::explicit(c)
            }
        }
    }

    /// The companion representation of a trimmed mean, if any.
    pub fn trimmed_companion(&self) -> Option<WeightDescriptor> {
        match *self {
            WeightDescriptor::Trimmed { t1, t2 } => Some(WeightDescriptor::TrimmedJ { t1, t2 }),
            WeightDescriptor::TrimmedJ { t1, t2 } => Some(WeightDescriptor::Trimmed { t1, t2 }),
            _ => None,
        }
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(Error::Parse(format!("expected two comma-separated numbers, got {s:?}")));
    };
    let p = |x: &str| x.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {x:?}")));
    Ok((p(a)?, p(b)?))
}

impl FromStr for WeightDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("mean", None) => Ok(Self::Mean),
            ("identity", None) => Ok(Self::Identity),
            ("gini", None) => Ok(Self::Gini),
            ("trimmed", Some(r)) => parse_pair(r).map(|(t1, t2)| Self::Trimmed { t1, t2 }),
            ("trimmed-j", Some(r)) => parse_pair(r).map(|(t1, t2)| Self::TrimmedJ { t1, t2 }),
            ("file", Some(path)) if !path.is_empty() => Ok(Self::File(PathBuf::from(path))),
            _ => Err(Error::Parse(format!("unknown weight descriptor {s:?}"))),
        }
    }
}

impl fmt::Display for WeightDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mean => write!(f, "mean"),
            Self::Identity => write!(f, "identity"),
            Self::Gini => write!(f, "gini"),
            Self::Trimmed { t1, t2 } => write!(f, "trimmed:{t1},{t2}"),
            Self::TrimmedJ { t1, t2 } => write!(f, "trimmed-j:{t1},{t2}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn function_weights() {
        let w = WeightScheme::from_function(WeightFunction::Constant, 3).unwrap();
        assert_eq!(w.c(), &[1.0, 1.0, 1.0]);
        let w = WeightScheme::from_function(WeightFunction::Identity, 3).unwrap();
        assert!(close(w.c(), &[0.25, 0.5, 0.75]));
        let w = WeightScheme::from_function(WeightFunction::Trimmed { t1: 0.25, t2: 0.75 }, 4).unwrap();
        assert!(close(w.c(), &[0.0, 2.0, 2.0, 0.0]));
        assert!(WeightScheme::from_closure("log", f64::ln, 0).is_err());
        assert!(WeightScheme::from_closure("inv", |u| 1.0 / (u - 0.5), 1).is_err());
    }

    #[test]
    fn trimmed_weights() {
        let w = WeightScheme::trimmed(0.25, 0.75, 4).unwrap();
        assert_eq!(w.c(), &[0.0, 2.0, 2.0, 0.0]);
        assert_eq!(trim_bounds(0.25, 0.75, 4).unwrap(), (2, 3));
        let w = WeightScheme::trimmed(0.1, 0.9, 10).unwrap();
        let want: Vec<f64> = (1..=10).map(|j| if (2..=9).contains(&j) { 1.25 } else { 0.0 }).collect();
        assert_eq!(w.c(), want.as_slice());
        assert!(WeightScheme::trimmed(0.4, 0.6, 4).is_err());
        assert!(WeightScheme::trimmed(0.6, 0.4, 40).is_err());
        assert!(WeightScheme::trimmed(0.0, 0.4, 40).is_err());
        // 0.29 * 100 is 28.999999999999996 in binary floating point.
        assert_eq!(trim_bounds(0.29, 0.71, 100).unwrap(), (30, 71));
    }

    #[test]
    fn diagnostics_examples() {
        let w = WeightScheme::from_function(WeightFunction::Identity, 3).unwrap();
        let d = w.diagnostics(1.0).unwrap();
        assert_eq!(d.sup_bound_a, 0.75);
        assert!((d.holder_b_at_delta - 1.0).abs() < 1e-14);
        for n in [1, 5, 50] {
            let d = WeightScheme::from_function(WeightFunction::Constant, n)
                .unwrap()
                .diagnostics(0.7)
                .unwrap();
            assert_eq!((d.sup_bound_a, d.holder_b_at_delta), (1.0, 0.0));
        }
        let d = WeightScheme::trimmed(0.25, 0.75, 4).unwrap().diagnostics(1.0).unwrap();
        assert_eq!((d.sup_bound_a, d.holder_b_at_delta), (2.0, 10.0));
        assert!(w.diagnostics(0.5).is_err());
    }

    #[test]
    fn trimmed_holder_constant_grows() {
        let b: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| WeightScheme::trimmed(0.1, 0.9, n).unwrap().diagnostics(0.75).unwrap().holder_b_at_delta)
            .collect();
        assert!(b.windows(2).all(|w| w[1] > w[0]), "{b:?}");
    }

    #[test]
    fn descriptors() {
        assert_eq!("mean".parse::<WeightDescriptor>().unwrap(), WeightDescriptor::Mean);
        assert_eq!(
            "trimmed:0.1,0.9".parse::<WeightDescriptor>().unwrap(),
            WeightDescriptor::Trimmed { t1: 0.1, t2: 0.9 }
        );
        assert_eq!(
            "file:w.txt".parse::<WeightDescriptor>().unwrap(),
            WeightDescriptor::File("w.txt".into())
        );
        for bad in ["median", "trimmed", "trimmed:0.1", "trimmed:a,b", "file:", "mean:3"] {
            assert!(bad.parse::<WeightDescriptor>().is_err(), "{bad}");
        }
        let d: WeightDescriptor = "trimmed-j:0.25,0.75".parse().unwrap();
        assert_eq!(d.to_string().parse::<WeightDescriptor>().unwrap(), d);
        assert_eq!(d.build(4).unwrap().c(), &[0.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn weights_from_file() {
        let dir = std::env::temp_dir().join(format!("finpop-w-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.txt");
        std::fs::write(&path, "# weights\n0\n2\n").unwrap();
        let d = WeightDescriptor::File(path.clone());
        let w = d.build(2).unwrap();
        assert_eq!(w.c(), &[0.0, 2.0]);
        assert_eq!(w.kind(), WeightKind::Explicit);
        assert!(d.build(3).is_err());
        std::fs::remove_dir_all(dir).ok();
    }
}
