//! Experiment runner: config resolution, replicated runs and CSV output.
//!
//! [`run_experiment`] is what the `bandit-sim run` command executes. Library
//! users who want per-replication numbers can call [`run_replication`]
//! directly.

use std::io::BufWriter;
use std::path::PathBuf;

use crate::SimError;

pub mod config;
pub mod logfile;
pub mod output;
pub mod runner;

pub use config::{load_config, load_config_with, ExperimentConfig, OnoffConfig, PolicyConfig, Preset};
pub use logfile::{read_logged_feedback, read_logged_feedback_file, write_logged_feedback};
pub use runner::{ipw_label, run_replication, simulate, Aggregate, Metric, OnoffValue, PolicyRun, ReplicationResult};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(SimError),
    #[error("replication {replication} (master_seed {master_seed}) failed: {source}")]
    Replication { replication: u64, master_seed: u64, source: SimError },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    /// Process exit status: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Runs `config` and writes its CSV files into `config.output_dir`.
/// Returns the paths written.
pub fn run_experiment(config: &ExperimentConfig, quiet: bool) -> Result<Vec<PathBuf>, RunError> {
    let dir = &config.output_dir;
    let log_dir = dir.join("logs");
    let mut written = Vec::new();
    if config.write_logs {
        std::fs::create_dir_all(&log_dir).map_err(|e| output::io_error(&log_dir, e))?;
    }
    let total = config.replications;
    let aggregate = simulate(config, |result| {
        for (label, rows) in &result.logs {
            let path = log_dir.join(format!("{label}_rep{}.csv", result.replication));
            let file = std::fs::File::create(&path).map_err(|e| output::io_error(&path, e))?;
            write_logged_feedback(BufWriter::new(file), rows).map_err(|e| output::io_error(&path, e))?;
            written.push(path);
        }
        if !quiet {
            eprintln!("replication {}/{total} done", result.replication + 1);
        }
        Ok(())
    })?;
    let mut files = output::write_aggregate(&aggregate, dir)?;
    files.extend(written);
    Ok(files)
}
