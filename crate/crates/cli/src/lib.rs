//! Batch front end for the ring-stability toolkit: config parsing, the four
//! commands, and deterministic report formatting.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use config::RunConfig;
pub use error::{CliError, EXIT_ERROR, EXIT_REFUSED, EXIT_STABLE, EXIT_UNSTABLE};

/// Applies the `MC_THREADS` worker cap before any parallel work runs. Unset
/// means the library default; anything set must be a positive integer.
pub fn init_thread_pool() -> Result<(), String> {
    let raw = match std::env::var("MC_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("MC_THREADS: {e}")),
        Ok(raw) => raw,
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("MC_THREADS must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err("MC_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))
}
