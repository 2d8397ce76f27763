//! Experiment orchestration: configuration, seeded parallel Monte Carlo runs
//! and result files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, ReceiverSpec, SweepSpec};
pub use output::{emit_experiment, emit_results, EmittedFiles};
pub use run::{generate_trial, run_experiment, run_trial, run_trials, ExperimentResult, RunResult, TrialData};
