//! Experiment harness: config files, checkpoints, run logs, multi-seed
//! orchestration, and evaluation of saved runs.
//!
//! On-disk conventions: configuration, manifests, and checkpoints use a
//! flat `key=value` text format ([`kv::KvMap`]); run logs and heat maps
//! are plain CSV. All floats are written in shortest round-trip form, so
//! files are byte-stable across reruns and reload to equal values.
//!
//! A run directory holds `config.kv`, `runlog.csv`, `checkpoint.kv`, a
//! `heatmap.csv` for gridworlds, and optional interim `checkpoint-<n>.kv`
//! files. [`experiment::run_experiment`] lays out one such directory per
//! (variant, seed) pair plus an aggregate `summary.json`.

pub mod checkpoint;
pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod kv;
pub mod report;

pub use checkpoint::Checkpoint;
pub use config::{EnvConfig, RunConfig};
pub use evaluate::{evaluate_checkpoint, render_eval, EvalReport};
pub use experiment::{run_experiment, ExperimentManifest, ExperimentReport, OUT_ENV_VAR};
pub use kv::KvMap;
