//! Experiment configuration, runs and curves files.
//!
//! A config is a flat TOML document; see [`ExperimentConfig`] for the keys.
//! A run writes `curves.csv` (rows `K,instance,metric,time_or_step,value`)
//! and `manifest.json` into the output directory.

mod config;
mod curves;
mod experiment;

pub use config::{emit_config, load_config, parse_config, Algorithm, EnvName, ExperimentConfig, ModeName, ScheduleName};
pub use curves::{format_summary, parse_curves, summarize, summarize_rows, CurveRow, SummaryRow, CURVES_HEADER};
pub use experiment::{
    env_seed, resolve_output_dir, run_experiment, run_instance, run_seed, ExperimentReport, InstanceOutcome, InstanceRecord, RunManifest,
    OUTPUT_ROOT_VAR,
};
