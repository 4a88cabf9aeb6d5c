//! Experiment orchestration: configuration, single runs, sweeps, statistics
//! and result files.

pub mod config;
pub mod experiment;
pub mod output;
pub mod stats;
pub mod sweep;

pub use config::{ConfigOverrides, DigitalSettings, ExperimentConfig};
pub use experiment::{
    build_graph, build_pools, prepare_inputs, run_experiment, run_prepared, run_prepared_full, run_seed,
    PreparedInputs, RunArtifacts, RunResult,
};
pub use output::{emit_results, read_aggregates_csv, read_json, write_aggregates_csv, write_json, write_runs_csv, OutputFormat};
pub use stats::{paired_t_test, t_test, t_test_with, Alternative, Stat, TTestResult};
pub use sweep::{aggregate, sweep, AggregateResult, CellFailure, CellKey, SweepConfig, SweepOutput};
