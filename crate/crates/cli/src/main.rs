use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use plap::{run, Command, RunConfig};

/// p-Laplacian Dirichlet solves, existence certificates and sweeps.
#[derive(Parser, Debug)]
#[command(name = "plap", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: Command,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Replace a config entry, e.g. `solver.grid_n=1024` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Cross-check against the finite-difference oracle.
    #[arg(long)]
    oracle: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = RunConfig::load(&cli.config, &cli.overrides).and_then(|cfg| {
        let out = run(cli.command, &cfg, cli.oracle)?;
        if cfg.output.json_path.is_none() {
            print!("{}", out.json);
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            eprintln!("{}", out.summary);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
