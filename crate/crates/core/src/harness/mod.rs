//! Experiment grids, parallel trial execution and result files.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod output;
pub mod trial;

pub use config::{ConfidenceSettings, ExperimentConfig, ExperimentKind, OneOrMany, StateFamily, StateSpec};
pub use experiment::{cells, execute, resolve_threads, run_experiment, Cell, CellConfidence, CellSummary, ExperimentResult, THREADS_ENV};
pub use output::{fmt_g9, trials_csv_string, write_outputs, OutputPaths};
pub use trial::{derive_trial_seed, run_trial, PipelineOptions, PreparedSlice, TargetState, TrialRecord, TrialSlice, TrialStatus};
pub use oracle::{oracle_check, OracleReport};
