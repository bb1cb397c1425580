//! Experiment configuration, the federated training loop, metrics, PCA and
//! report files.

mod config;
mod ops;
mod pca;
pub mod report;
mod sim;
mod svg;

pub use config::{load_config, CheckpointMode, ExperimentConfig, Profile};
pub use ops::{analyze, bound, output_root, read_summary, resolve_output_dir, run_and_report, sweep, Analysis, BoundAnalysis, SweepEntry, OUTPUT_ROOT_VAR};
pub use pca::{pca_project, PcaProjection};
pub use report::{emit_report, final_submission_pca, summarize, SeedPca, Summary};
pub use sim::{derive_seed, run_experiment, run_seed, ExperimentResult, RoundRow, SeedRun, TtiRow};
