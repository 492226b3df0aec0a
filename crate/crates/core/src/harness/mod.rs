//! Configuration-driven experiments, theory comparison, verification
//! suites and the command line interface.

pub mod cli;
pub mod compare;
pub mod config;
pub mod experiment;
pub mod verify;

pub use compare::{compare_theory, ComparisonRow, TheoryComparison};
pub use config::{ExperimentConfig, LikelihoodSpec, NetworkSpec, Overrides, RunSpec};
pub use experiment::{error_counts_from_trace, run_experiment, ErrorReport, ExperimentReport, SteadyState};
pub use verify::{run_all as verify_all, CheckResult};
