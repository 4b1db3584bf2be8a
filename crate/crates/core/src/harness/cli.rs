//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{ExperimentSpec, Mode};
use super::runner::run;
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const THREADS_ENV: &str = "DECENTEQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "decenteq", version, about = "Decentralized massive MU-MIMO equalization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment recipe and write its table.
    Run(RunArgs),
    /// Check a recipe without computing anything.
    Validate {
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Override the recipe seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: $DECENTEQ_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path (default: recipe `output`, else <name>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `svg` also writes a line plot next to the CSV.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::UnsupportedConstellation(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first) and executes the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Validate { config } => match ExperimentSpec::load(&config) {
            Ok(spec) => {
                println!(
                    "{}: ok ({}, {} points, {} series)",
                    config.display(),
                    spec.mode.name(),
                    spec.sweep.values.len(),
                    spec.series.len()
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                exit_code(&e)
            }
        },
        Command::Run(args) => run_command(args),
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count")),
        Err(_) => Ok(0),
    }
}

fn run_command(args: RunArgs) -> i32 {
    let mut spec = match ExperimentSpec::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return exit_code(&e);
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Err(e) = spec.validate() {
        eprintln!("{e}");
        return exit_code(&e);
    }
    let threads = match thread_count(args.threads) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("{msg}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker threads: {e}");
            return EXIT_RUNTIME;
        }
    };

    let table = match pool.install(|| run(&spec)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", spec.name);
            return exit_code(&e);
        }
    };

    let out = args
        .out
        .or_else(|| spec.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.name)));
    if let Err(e) = write_file(&out, &table.to_csv()) {
        eprintln!("{e}");
        return EXIT_RUNTIME;
    }
    if args.format == Format::Svg {
        let svg = out.with_extension("svg");
        if let Err(e) = write_file(&svg, &table.to_svg(&spec.name, spec.mode == Mode::SerMc)) {
            eprintln!("{e}");
            return EXIT_RUNTIME;
        }
        println!("wrote {}", svg.display());
    }
    print!("{}", table.csv_body());
    println!("wrote {} ({} rows)", out.display(), table.rows.len());
    EXIT_OK
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
