//! Experiment harness: seeded runs, conversion sweeps, rank tables,
//! accuracy/speed comparisons and map-aging robustness curves.

pub mod commands;
pub mod config;
pub mod error;
pub mod rank;
pub mod scenario;
pub mod svg;
pub mod sweep;

pub use config::Config;
pub use error::CliError;
pub use ortholoc_core::{ConversionSpec, RunReport};
pub use rank::{Comparison, RankRow};
pub use scenario::Scenario;
pub use sweep::{CellResult, RunRecord, SweepResult};

/// Runs `f` on a pool of `jobs` threads, or on the global pool when `None`.
pub fn with_jobs<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match jobs {
        None => f(),
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(f),
    }
}
