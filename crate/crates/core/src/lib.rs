//! L-statistics of simple random samples drawn without replacement from a
//! finite population: exact Hoeffding linear part, degeneracy of the
//! remainder, finite-scale normality diagnostics, exact enumeration for small
//! populations and seeded Monte Carlo for the rest.
//!
//! Populations are stored sorted; every index in this crate is a 0-based
//! position in that sorted order.

pub mod combinatorics;
pub mod diagnostics;
pub mod error;
pub mod lstat;
pub mod montecarlo;
pub mod numeric;
pub mod oracle;
pub mod population;
pub mod sampling;
pub mod weights;

pub use error::{Error, Result};
pub use lstat::{g1_table, l_statistic, HoeffdingDecomposition, LStatistic, SampleEvaluation};
pub use montecarlo::{McEstimate, NormalityReport, SigmaSource};
pub use population::Population;
pub use sampling::{RngSpec, SampleDraw};
pub use weights::{WeightDescriptor, WeightFunction, WeightScheme};
