//! Experiment orchestration: configs, repeated runs, regret envelopes,
//! timing benches and result files.

pub mod bench;
pub mod config;
pub mod envelope;
pub mod persist;
pub mod run;
pub mod verify;

pub use bench::{timing_bench, BenchSettings, TimingRow};
pub use config::{BatchSpec, ExperimentConfig, PolicySpec};
pub use envelope::{check_envelope, BoundEnvelope, EnvelopeReport};
pub use persist::{persist_results, Manifest};
pub use run::{run_experiment, run_experiment_with_threads, ExperimentResult, Metric, PolicyRuns, TraceStats};
