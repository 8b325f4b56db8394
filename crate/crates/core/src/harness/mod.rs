//! Experiment configuration, sweeps, cost accounting and the acceptance
//! suite.

pub mod acceptance;
pub mod config;
pub mod cost;
pub mod experiment;
pub mod oracle;

pub use acceptance::{acceptance_suite, Acceptance, AcceptanceOptions, AcceptanceReport, CriterionResult};
pub use config::{ExperimentConfig, ProblemSpec, SolverSpec};
pub use cost::{w1, w2};
pub use experiment::{
    emit_trace_plot_data, expand_cells, plot_data_csv, run_cell, run_experiment, run_experiment_with, timings_path,
    write_outputs, Cell, CellRun, ExperimentResult, ResultRow, RESULT_COLUMNS,
};
