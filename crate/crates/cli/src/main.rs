use std::path::PathBuf;
use std::process::ExitCode;

use certilind_cli::commands::{self, CliError, Overrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "certilind", version, about = "Certified Lindblad simulations on truncated Fock spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one model file and write trajectory, ledger, final state and summary.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        space_tol: Option<f64>,
        #[arg(long)]
        time_tol: Option<f64>,
    },
    /// Run a model file on several fixed truncations and compare with the largest.
    Sweep {
        file: PathBuf,
        /// Comma-separated shapes: `12`, `8x4`, or an inclusive range `4..30`.
        #[arg(long)]
        shapes: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        space_tol: Option<f64>,
        #[arg(long)]
        time_tol: Option<f64>,
    },
    /// Run a built-in preset (use --list to see them).
    Reproduce {
        #[arg(required_unless_present = "list")]
        preset: Option<String>,
        #[arg(long)]
        list: bool,
        /// Print the preset's model file instead of running it.
        #[arg(long)]
        show: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match cli.command {
        Command::Simulate { file, out, space_tol, time_tol } => {
            commands::simulate(&file, &out, &Overrides { space_tol, time_tol }).map(|s| {
                println!("xi(T) = {:e}, final dimension {}, {:.2}s", s.xi, s.dim, s.wall_time_s);
            })
        }
        Command::Sweep { file, shapes, out, jobs, space_tol, time_tol } => {
            commands::sweep(&file, &shapes, &out, jobs, &Overrides { space_tol, time_tol }).map(|points| {
                for p in points {
                    println!("{:<10} xi_T = {:e}  dist_to_ref = {:e}", p.shape.size_label(), p.xi, p.dist_to_ref);
                }
            })
        }
        Command::Reproduce { list: true, .. } => {
            print!("{}", commands::list_presets());
            Ok(())
        }
        Command::Reproduce { preset, show: true, .. } => {
            commands::preset_model(preset.as_deref().unwrap_or_default()).map(|m| print!("{m}"))
        }
        Command::Reproduce { preset, out, jobs, .. } => {
            commands::reproduce(preset.as_deref().unwrap_or_default(), &out, jobs).map(|dir| {
                println!("wrote {}", dir.display());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
