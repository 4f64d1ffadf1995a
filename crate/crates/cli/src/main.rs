use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sturmosc_cli::{run, Command, ProblemConfig};

/// Spectral and oscillation analysis of Sturm–Liouville pencils with
/// distributional coefficients.
#[derive(Debug, Parser)]
#[command(name = "sturmosc", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Problem description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `analysis.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mesh_cells`.
    #[arg(long)]
    cells: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ProblemConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(seed) = args.seed {
            cfg.analysis.seed = seed;
        }
        if let Some(cells) = args.cells {
            if cells == 0 {
                return Err(sturmosc_cli::CliError::Config("--cells: must be positive".into()));
            }
            cfg.mesh_cells = cells;
        }
        run(args.command, &cfg, &args.out)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sturmosc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
