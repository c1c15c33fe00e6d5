use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbto_cli::{cmd_estimate, cmd_run, estimate_report, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "rbto", version, about = "Reliability-based topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Iteration count; overrides `iterations` in the configuration.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Worker cap. Accepted for compatibility; all work runs on the calling thread.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configured problem and write history, design and summary files.
    Run { config: PathBuf },
    /// Estimate the failure probability of a fixed design.
    Estimate { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        iterations: cli.iterations,
    };
    match cli.command {
        Command::Run { config } => {
            let mut cfg = RunConfig::from_file(&config)?;
            overrides.apply(&mut cfg);
            let o = cmd_run(&cfg)?;
            println!("wrote {}", o.out_dir.display());
            println!("posthoc p_hat {:e}", o.posthoc.p_hat);
            if let Some(m) = o.summary.get("trailing_objective_mean").and_then(|v| v.as_f64()) {
                println!("trailing objective {m:.6}");
            }
        }
        Command::Estimate { config } => {
            let mut cfg = RunConfig::from_file(&config)?;
            overrides.apply(&mut cfg);
            let e = cmd_estimate(&cfg)?;
            print!("{}", estimate_report(&e));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rbto: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
