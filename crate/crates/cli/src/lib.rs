//! Batch driver around `finpop_lstat`: population generators, experiment
//! plans and convergence studies.

pub mod error;
pub mod generate;
pub mod plan;
pub mod study;

pub use error::{CliError, CliResult};
pub use generate::PopulationSpec;
pub use plan::{ExperimentPlan, PlanFields};
pub use study::{run_convergence_study, run_with_threads, StudyOutput, StudyRow};
