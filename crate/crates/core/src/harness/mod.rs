//! Experiment harness: configuration, seeded runs, bootstrap intervals,
//! plot data and the verification suites.

mod bootstrap;
mod experiment;
mod plot;
pub mod verify;

pub use bootstrap::{bootstrap_ci, mean, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
pub use experiment::{
    run_experiment, EnvSpec, ExperimentConfig, PolicySpec, PolicySummary, ResultsTable, RunRow,
};
pub use plot::{emit_plot_data, run_sweep, SweepKey, ITERATION_GRID};
