//! Experiment configuration, sweeps and result files.

pub mod config;
pub mod emit;
pub mod sweep;

pub use config::{ExperimentConfig, OutputFormat, ParamSource, Settings, Sweep, SweepKind, SweepRange, TauBar};
pub use emit::{emit, load_json, write_csv, write_json, CSV_HEADER};
pub use sweep::{run, Experiment, SweepResult, SweepRow};
