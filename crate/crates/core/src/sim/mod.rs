//! Monte Carlo experiments: configuration, trial generation, metrics and
//! result tables.

pub mod config;
pub mod curves;
pub mod experiment;
pub mod metrics;

pub use config::{Method, ScenarioConfig, SystemConfig};
pub use curves::{aggregate, write_curves, CurvePoint};
pub use experiment::{generate_trial, read_csv, run_experiment, run_trial, write_csv, Trial, TrialResult};
pub use metrics::{compression_ratio, nmse_channel, nmse_coupling, to_db};
