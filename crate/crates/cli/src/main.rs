//! `micromech` command-line front end.
//!
//! Exit status: 0 on success, 1 on a domain failure, 2 on misuse (bad flags,
//! unreadable or invalid configs).

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use micromech::dataset::DatasetConfig;
use micromech::error::Error;
use micromech::multiscale::PlateConfig;
use micromech::rve::FiberRveConfig;
use serde::de::DeserializeOwned;
use serde_json::Value;

use commands::{HomogenizeConfig, SolveConfig, SpinodalConfig};
use config::ConfigError;

#[derive(Parser)]
#[command(
    name = "micromech",
    version,
    about = "FFT homogenization, RVE generation and two-scale plate runs"
)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set solver.tol=1e-8` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Summary JSON path; defaults to `<out>/summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Random periodic fiber cell.
    GenRve(RunArgs),
    /// Two-phase cell from a Cahn-Hilliard run.
    GenSpinodal(RunArgs),
    /// Strain and stress fields under one mean strain.
    Solve(RunArgs),
    /// Concentration tensor and effective stiffness of one cell.
    Homogenize(RunArgs),
    /// Labeled samples with stored concentration fields.
    Dataset {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset root; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Summary JSON path; defaults to `<output_dir>/summary.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Two-scale plate under top-edge displacement.
    Multiscale(RunArgs),
    /// Grayscale PGM of one field component.
    ExportImage {
        /// Array file to render.
        #[arg(long)]
        field: PathBuf,
        /// Component along the trailing axes, flattened; required for fields with more than two axes.
        #[arg(long)]
        component: Option<usize>,
        /// PGM path; the normalization goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a stored dataset against its manifest.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        /// Report path; defaults to `<dataset>/validation.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Domain(Error),
    /// Ran to completion but found problems (already logged).
    Check,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(format!("invalid configuration: {msg}")),
            other => Failure::Domain(other),
        }
    }
}

fn write_summary(path: &Path, v: &Value) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let text = serde_json::to_string_pretty(v).map_err(Error::from)? + "\n";
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn run_with<T: DeserializeOwned>(
    args: &RunArgs,
    body: impl FnOnce(&T, &Path) -> micromech::error::Result<Value>,
) -> Result<(), Failure> {
    let cfg: T = config::load(args.config.as_deref(), &args.overrides)?;
    let summary = body(&cfg, &args.out)?;
    let path = args
        .summary
        .clone()
        .unwrap_or_else(|| args.out.join("summary.json"));
    write_summary(&path, &summary)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenRve(a) => run_with::<FiberRveConfig>(&a, commands::gen_rve),
        Command::GenSpinodal(a) => run_with::<SpinodalConfig>(&a, commands::gen_spinodal),
        Command::Solve(a) => run_with::<SolveConfig>(&a, commands::solve),
        Command::Homogenize(a) => run_with::<HomogenizeConfig>(&a, commands::homogenize),
        Command::Multiscale(a) => run_with::<PlateConfig>(&a, commands::multiscale),
        Command::Dataset {
            config,
            out,
            overrides,
            summary,
        } => {
            let mut cfg: DatasetConfig = config::load(config.as_deref(), &overrides)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let s = commands::dataset(&cfg)?;
            write_summary(
                &summary.unwrap_or_else(|| cfg.output_dir.join("summary.json")),
                &s,
            )
        }
        Command::ExportImage {
            field,
            component,
            out,
        } => {
            commands::image(&field, component, &out)?;
            Ok(())
        }
        Command::Validate { dataset, summary } => {
            let (report, ok) = commands::validate(&dataset)?;
            write_summary(
                &summary.unwrap_or_else(|| dataset.join("validation.json")),
                &report,
            )?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => ExitCode::from(1),
    }
}
