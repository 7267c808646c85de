//! Batch front-end for OTOC scaling experiments: plan parsing, a spectral
//! cache, sweep execution and artifact writing.

pub mod cache;
pub mod error;
pub mod plan;
pub mod report;
pub mod runner;

pub use cache::{cache_key, clean_cache, default_cache_dir, CacheStats, SpectralCache};
pub use error::CliError;
pub use plan::{load_plan, parse_plan, ExperimentPlan, LoadedPlan, PlanKind};
pub use runner::{
    execute_loaded, execute_plan, load_report, Analysis, Report, RunManifest, RunOptions,
    RunOutcome, RunStatus, TaskStatus,
};
