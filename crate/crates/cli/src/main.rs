use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use susflow_cli::{
    default_format, emit, parse_toml, run_with_workers, CliError, Experiment, ExperimentConfig,
    Format, RunReport,
};

/// Numerical experiments on suspension semi-flows over `x -> l*x mod 1`.
#[derive(Parser)]
#[command(name = "susflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid estimates of the cone-overlap weights m(f,t) and n(f,t).
    Transversality(RunArgs),
    /// Cobounding potential, cocycle residual and weak-mixing verdict.
    Mixing(RunArgs),
    /// Leading eigenvalues of the Ulam transfer matrix.
    Spectrum(RunArgs),
    /// Correlation curve of two observables.
    Correlations(RunArgs),
    /// Anisotropic norms and their checks on test functions.
    Norms(RunArgs),
    /// Slope clusters and the bad-set probe.
    Genericity(RunArgs),
    /// Dump of every inverse branch at one point.
    Branches(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; `-` reads standard input.
    #[arg(short, long)]
    config: PathBuf,
    /// Output path (overrides the config); standard output by default.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Output format; each experiment has its own default.
    #[arg(short, long, value_enum)]
    format: Option<Format>,
    /// Worker threads (overrides the config).
    #[arg(short, long, env = "SUSFLOW_WORKERS")]
    workers: Option<usize>,
    /// Seed for sampled quantities (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Transversality(a) => (Experiment::Transversality, a),
            Command::Mixing(a) => (Experiment::Mixing, a),
            Command::Spectrum(a) => (Experiment::Spectrum, a),
            Command::Correlations(a) => (Experiment::Correlations, a),
            Command::Norms(a) => (Experiment::Norms, a),
            Command::Genericity(a) => (Experiment::Genericity, a),
            Command::Branches(a) => (Experiment::Branches, a),
        }
    }
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let text = if args.config.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(&args.config)?
    };
    let mut cfg = parse_toml(&text)?;
    cfg.select(experiment)?;
    if let Some(o) = &args.output {
        cfg.output = Some(o.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(cfg: &ExperimentConfig, bytes: &[u8]) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    let cfg = match load(experiment, &args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("susflow: {e}");
            return code(e.exit_code());
        }
    };
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let format = args.format.unwrap_or(default_format(experiment));
    let (report, status) = match run_with_workers(&cfg, workers) {
        Ok(report) => (report, 0),
        Err(e) => {
            eprintln!("susflow: {e}");
            (RunReport::failure(&cfg, &e), e.exit_code())
        }
    };
    let written = emit(&report, format).and_then(|bytes| write_out(&cfg, &bytes));
    match written {
        Ok(()) => code(status),
        Err(e) => {
            eprintln!("susflow: {e}");
            code(if status == 0 { e.exit_code() } else { status })
        }
    }
}
