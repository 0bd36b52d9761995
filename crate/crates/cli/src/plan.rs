//! Experiment plans: plain `key = value` files, one field per line.
//!
//! ```text
//! # trimmed-mean sweep on an equispaced grid
//! population = equispaced
//! family = 40:20, 100:50, 250:125, 600:300
//! weights = trimmed:0.1,0.9
//! reps = 20000
//! seed = 2024
//! ```
//!
//! `family = doubling:N0,K` expands to `N0, 2 N0, ..., 2^(K-1) N0`, each with
//! `n = floor(N/2)` and `n = floor(N^0.6)`; this is also the default.

use std::collections::BTreeMap;
use std::path::PathBuf;

use finpop_lstat::diagnostics::{DEFAULT_DELTAS, DEFAULT_EPSILONS};
use finpop_lstat::WeightDescriptor;
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliError, CliResult};
use crate::generate::PopulationSpec;

pub const MIN_KS_REPS: usize = 100;
pub const DEFAULT_SIGMA_REPS: usize = 100_000;
const DEFAULT_FAMILY: (usize, usize) = (40, 5);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub population: PopulationSpec,
    pub family: Vec<(usize, usize)>,
    pub weights: WeightDescriptor,
    pub reps: usize,
    /// Replicates of the separate run that estimates `sigma_n` when the
    /// population is too large to enumerate.
    pub sigma_reps: usize,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Plan fields as read from a file or the command line; later sources
/// override earlier ones field by field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanFields {
    pub population: Option<PopulationSpec>,
    pub family: Option<Vec<(usize, usize)>>,
    pub weights: Option<WeightDescriptor>,
    pub reps: Option<usize>,
    pub sigma_reps: Option<usize>,
    pub seed: Option<u64>,
    pub epsilons: Option<Vec<f64>>,
    pub deltas: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn doubling_family(start: usize, levels: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 0..levels {
        let big_n = start << k;
        out.push((big_n, big_n / 2));
        let sparse = (big_n as f64).powf(0.6).floor() as usize;
        if sparse != big_n / 2 {
            out.push((big_n, sparse));
        }
    }
    out
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',').map(|x| parse_num::<f64>(key, x)).collect()
}

pub fn parse_family(v: &str) -> CliResult<Vec<(usize, usize)>> {
    let v = v.trim();
    if let Some(rest) = v.strip_prefix("doubling:") {
        let (a, b) = rest
            .split_once(',')
            .ok_or_else(|| CliError::Validation(format!("family: expected doubling:N0,K, got {v:?}")))?;
        return Ok(doubling_family(parse_num("family", a)?, parse_num("family", b)?));
    }
    v.split(',')
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| CliError::Validation(format!("family: expected N:n, got {item:?}")))?;
            Ok((parse_num("family", a)?, parse_num("family", b)?))
        })
        .collect()
}

impl PlanFields {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return invalid(format!("plan line {}: expected key = value", lineno + 1));
            };
            let k = k.trim().to_string();
            if seen.insert(k.clone(), v.trim().to_string()).is_some() {
                return invalid(format!("plan line {}: duplicate key {k}", lineno + 1));
            }
        }
        let mut f = PlanFields::default();
        for (k, v) in &seen {
            match k.as_str() {
                "population" => f.population = Some(v.parse()?),
                "family" => f.family = Some(parse_family(v)?),
                "weights" => f.weights = Some(v.parse()?),
                "reps" => f.reps = Some(parse_num(k, v)?),
                "sigma_reps" => f.sigma_reps = Some(parse_num(k, v)?),
                "seed" => f.seed = Some(parse_num(k, v)?),
                "epsilons" => f.epsilons = Some(parse_list(k, v)?),
                "deltas" => f.deltas = Some(parse_list(k, v)?),
                "out" => f.out = Some(PathBuf::from(v)),
                "log" => f.log = Some(PathBuf::from(v)),
                "threads" => f.threads = Some(parse_num(k, v)?),
                _ => return invalid(format!("unknown plan key {k:?}")),
            }
        }
        Ok(f)
    }

    /// Field-wise override: values set in `other` win.
    pub fn overridden_by(self, other: PlanFields) -> PlanFields {
        PlanFields {
            population: other.population.or(self.population),
            family: other.family.or(self.family),
            weights: other.weights.or(self.weights),
            reps: other.reps.or(self.reps),
            sigma_reps: other.sigma_reps.or(self.sigma_reps),
            seed: other.seed.or(self.seed),
            epsilons: other.epsilons.or(self.epsilons),
            deltas: other.deltas.or(self.deltas),
            out: other.out.or(self.out),
            log: other.log.or(self.log),
            threads: other.threads.or(self.threads),
        }
    }

    pub fn into_plan(self) -> CliResult<ExperimentPlan> {
        let Some(population) = self.population else {
            return invalid("plan has no population");
        };
        let Some(weights) = self.weights else {
            return invalid("plan has no weights");
        };
        let plan = ExperimentPlan {
            population,
            family: self
                .family
                .unwrap_or_else(|| doubling_family(DEFAULT_FAMILY.0, DEFAULT_FAMILY.1)),
            weights,
            reps: self.reps.unwrap_or(10_000),
            sigma_reps: self.sigma_reps.unwrap_or(DEFAULT_SIGMA_REPS),
            seed: self.seed.unwrap_or(0),
            epsilons: self.epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec()),
            deltas: self.deltas.unwrap_or_else(|| DEFAULT_DELTAS.to_vec()),
            out: self.out,
            log: self.log,
            threads: self.threads,
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl ExperimentPlan {
    pub fn parse(text: &str) -> CliResult<Self> {
        PlanFields::parse(text)?.into_plan()
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.family.is_empty() {
            return invalid("plan family is empty");
        }
        for &(big_n, n) in &self.family {
            if n < 1 || n >= big_n {
                return invalid(format!("family entry {big_n}:{n} violates 1 <= n < N"));
            }
        }
        if self.reps < MIN_KS_REPS {
            return invalid(format!("reps must be at least {MIN_KS_REPS}, got {}", self.reps));
        }
        if self.sigma_reps < 2 {
            return invalid("sigma_reps must be at least 2");
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return invalid("epsilons must be a non-empty list of positive numbers");
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.5 && *d <= 1.0)) {
            return invalid("deltas must be a non-empty list in (0.5, 1]");
        }
        if self.threads == Some(0) {
            return invalid("threads must be positive");
        }
        Ok(())
    }

    /// The fields that determine results, one `key = value` per line.
    /// Output paths and the thread count are left out.
    pub fn canonical(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let family = self
            .family
            .iter()
            .map(|(a, b)| format!("{a}:{b}"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "population = {}\nfamily = {family}\nweights = {}\nreps = {}\nsigma_reps = {}\nseed = {}\nepsilons = {}\ndeltas = {}\n",
            self.population,
            self.weights,
            self.reps,
            self.sigma_reps,
            self.seed,
            join(&self.epsilons),
            join(&self.deltas),
        )
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}
