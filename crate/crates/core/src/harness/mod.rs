//! Experiment orchestration and report emission.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{run_experiment_id, CheckParams, ExperimentConfig, GridConfig, InitialLaw, ModelConfig, PicardSection, EXPERIMENT_REFERENCE};
pub use experiments::{
    chaos_experiment, chaoticity_test, check_conditions, coupled_chaos, moment_diagnostic,
    simulate_run, solve_law, solve_reference, TestFunctional,
};
pub use report::{mean_and_stderr, means_csv, residuals_csv, ReportRow, RunReport};
