use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fbsde_core::cli::{execute, Command, Format, Overrides};

#[derive(Parser)]
#[command(name = "fbsde", version, about = "Domain-decomposition four-step solver for coupled FBSDEs")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the config and probe the problem's standing assumptions.
    Validate(Args),
    /// Solve the decoupling system on the whole box.
    SolvePde(Args),
    /// Monodomain reference, Schwarz iteration and gluing.
    RunSchwarz(Args),
    /// Simulate paths against the monodomain field.
    Simulate(Args),
    /// All four stages; paths run against the glued field.
    Pipeline(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, overriding `outputs.directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Write only this format, overriding `outputs.formats`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// RNG seed, overriding `sde.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Validate(a) => (Command::Validate, a),
        Sub::SolvePde(a) => (Command::SolvePde, a),
        Sub::RunSchwarz(a) => (Command::RunSchwarz, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Pipeline(a) => (Command::Pipeline, a),
    };
    let overrides = Overrides {
        out: args.out,
        format: args.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        seed: args.seed,
    };
    match execute(&args.config, command, &overrides) {
        Ok(run) => {
            for path in &run.files {
                println!("{}", path.display());
            }
            if let Some(report) = &run.outcome.schwarz {
                eprintln!(
                    "schwarz: {} iterations, E_q = {:e}, stop = {}",
                    report.iterations(),
                    report.final_error(),
                    report.stop_reason.as_str()
                );
            }
            if let Some(summary) = &run.outcome.ensemble {
                eprintln!(
                    "sde: mean Y_0 = {:?}, E|R_0|^2 = {:e}",
                    summary.rows[0].mean_y, summary.rows[0].residual.mean_square
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
