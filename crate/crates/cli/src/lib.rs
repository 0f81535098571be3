//! Driver for susflow experiments: TOML configs in, deterministic reports
//! out.
//!
//! - [`config`]: the experiment config, parsed and validated in full.
//! - [`report`]: dispatch to the core modules and the report envelope.
//! - [`emit`]: JSON, JSON-lines and CSV serialization.

pub mod config;
pub mod emit;
pub mod error;
pub mod report;

pub use config::{parse_config, parse_toml, Experiment, ExperimentConfig};
pub use emit::{emit, Format};
pub use error::CliError;
pub use report::{run, RunReport};

/// Default output format of each experiment.
pub fn default_format(experiment: Experiment) -> Format {
    match experiment {
        Experiment::Transversality | Experiment::Genericity => Format::Jsonl,
        Experiment::Correlations | Experiment::Branches => Format::Csv,
        Experiment::Mixing | Experiment::Spectrum | Experiment::Norms => Format::Json,
    }
}

/// Runs `cfg` on a pool of `workers` threads.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<RunReport, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    pool.install(|| run(cfg))
}
