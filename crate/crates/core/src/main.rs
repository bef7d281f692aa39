use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fracp::cli::{error_exit_code, run};
use fracp::config::{RunConfig, Subcommand};

/// Numerical checks for nonlocal p-Laplace operators. Writes a JSON report
/// (and CSV where relevant); exits 0 on pass, 1 on a violated property,
/// 2 on a usage or configuration error.
#[derive(Parser)]
#[command(name = "fracp", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML run configuration.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match RunConfig::load(&args.config).and_then(|cfg| run(args.subcommand, &cfg)) {
        Ok(out) => {
            println!("{}: {}", args.subcommand.name(), out.summary);
            for a in &out.artifacts {
                println!("  wrote {}", a.display());
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
