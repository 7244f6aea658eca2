//! Experiment driver: dataset generation, feature extraction, retrieval and
//! classification runs configured from a TOML file.

pub mod commands;
pub mod config;
pub mod features;
pub mod output;

pub use commands::{cmd_classify, cmd_extract, cmd_gen, cmd_retrieve, ClassifyResult};
pub use config::ExperimentConfig;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "ROTINV_THREADS";

/// Size the global thread pool from `ROTINV_THREADS` when it is set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("{THREADS_ENV} must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
