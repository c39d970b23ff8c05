use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use impulse_game::cli_io::{run, Command, RunFlags};
use impulse_game::grid_interp::BoundaryPolicy;

#[derive(Parser)]
#[command(name = "impulse-game", version, about = "Grid solver for zero-sum impulse-control games")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Backward sweep; writes the value field.
    Solve(Common),
    /// Solve, then extract the equilibrium path from the initial state.
    Extract(Common),
    /// Solve, extract and run the seeded deviation audit.
    Verify(Common),
    /// Refinement study over `[refine] h_list`.
    Refine(Common),
    /// Solve the `[portfolio]` wealth game and report the investor strategy.
    Portfolio(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    Error,
    Clamp,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long = "emit-plots")]
    emit_plots: bool,
    /// Exit with status 2 on solver warnings or a failed audit.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Extract(c) => (Command::Extract, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Refine(c) => (Command::Refine, c),
        Cmd::Portfolio(c) => (Command::Portfolio, c),
    };
    let flags = RunFlags {
        h: c.h,
        tolerance: c.tol,
        max_iterations: c.max_iter,
        output_dir: c.output_dir,
        emit_plots: c.emit_plots,
        strict: c.strict,
        boundary: c.boundary.map(|b| match b {
            Boundary::Error => BoundaryPolicy::Error,
            Boundary::Clamp => BoundaryPolicy::Clamp,
        }),
        seed: c.seed,
    };
    let outcome = run(command, &c.config, &flags);
    for m in &outcome.messages {
        eprintln!("{m}");
    }
    if let Some(p) = &outcome.manifest {
        println!("{}", p.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
