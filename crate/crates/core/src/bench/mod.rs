//! Benchmark harness behind the `kherd` binary.

pub mod check;
pub mod config;
pub mod plot;
pub mod points;
pub mod rows;
pub mod run;
pub mod slope;

pub use config::ExperimentConfig;
pub use points::{fill_distance, generate_candidates, probe_points};
pub use rows::{read_rows, read_rows_file, write_rows, write_rows_file, ResultRow};
pub use run::{build_embedding, build_pool, run_experiment, write_outputs, ExperimentOutput};
pub use slope::{fit_loglog, loglog_slope, Axis};
