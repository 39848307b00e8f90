//! Command-line front end: parses experiment configs, dispatches to the
//! library and writes reproducible run directories.
//!
//! Exit codes: 2 for config/schema violations (the offending field path is
//! printed), 3 for numerical failures, 1 for I/O problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uninet_cli::config::{self, Config, SchemaError};
use uninet_cli::report::RunDir;
use uninet_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "uninet",
    version,
    about = "Unitary network models: walks, BB/CMV matrices, the Chalker-Coddington \
             model, band structures and commutator positivity checks",
    after_help = "Thread count is controlled only through the RAYON_NUM_THREADS \
                  environment variable. Outputs are byte-identical across runs of \
                  the same config."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: runs/<command>-<config hash>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the band-scan grid resolution.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Override the truncation side length.
    #[arg(long, global = true)]
    truncation: Option<usize>,

    /// Override the crossing-detection tolerance.
    #[arg(long, global = true)]
    tol_gap: Option<f64>,

    /// Override the critical-point tolerance.
    #[arg(long, global = true)]
    tol_grad: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured operator and export it as coordinate CSV.
    Build,
    /// Band structure of the homogeneous symbol: curves, arcs, exceptional
    /// phases, optional window certification.
    Bands,
    /// Detected exceptional quasienergies against the closed forms.
    Tau,
    /// Verify a unitary equivalence and report its residual.
    Verify {
        /// One of: cc-qw, qw-bb, bb-square, gauge, cmv-roundtrip.
        #[arg(long)]
        relation: String,
    },
    /// Commutator positivity check on the configured phase window.
    Mourre,
    /// Time evolution from a local state: position moments and spreading.
    Evolve,
    /// Dense eigendecomposition and spectral-measure estimate.
    Spectrum,
    /// Isolated-eigenphase counts across truncation sizes.
    Stability,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli.config.ok_or_else(|| {
        CliError::Schema(SchemaError { path: "--config".into(), message: "missing config path".into() })
    })?;
    let raw = std::fs::read(&config_path).map_err(CliError::io)?;
    let text = String::from_utf8_lossy(&raw);
    let mut cfg = Config::from_json(&text).map_err(CliError::Schema)?;

    if let Some(grid) = cli.grid {
        cfg.grid = Some(grid);
    }
    if let Some(l) = cli.truncation {
        cfg.model.truncation = l;
        cfg.validate().map_err(CliError::Schema)?;
    }
    if let Some(gap) = cli.tol_gap {
        cfg.tolerances.gap = gap;
    }
    if let Some(grad) = cli.tol_grad {
        cfg.tolerances.grad = grad;
    }

    let name = match &cli.command {
        Command::Build => "build",
        Command::Bands => "bands",
        Command::Tau => "tau",
        Command::Verify { .. } => "verify",
        Command::Mourre => "mourre",
        Command::Evolve => "evolve",
        Command::Spectrum => "spectrum",
        Command::Stability => "stability",
    };
    let out = cli.out.unwrap_or_else(|| {
        PathBuf::from("runs").join(format!("{name}-{}", &config::config_hash(&raw)[..8]))
    });
    let run_dir = RunDir::create(out, &raw, cfg.tolerances.clone())?;

    match &cli.command {
        Command::Build => commands::build(&cfg, &run_dir)?,
        Command::Bands => commands::bands(&cfg, &run_dir)?,
        Command::Tau => commands::tau(&cfg, &run_dir)?,
        Command::Verify { relation } => commands::verify(&cfg, &run_dir, relation)?,
        Command::Mourre => commands::mourre(&cfg, &run_dir)?,
        Command::Evolve => commands::evolve(&cfg, &run_dir)?,
        Command::Spectrum => commands::spectrum(&cfg, &run_dir)?,
        Command::Stability => commands::stability(&cfg, &run_dir)?,
    }
    println!("wrote {}", run_dir.path().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Schema(e)) => {
            eprintln!("config error at {e}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::FAILURE
        }
    }
}
