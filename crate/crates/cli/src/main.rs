//! Binary entry point: parse flags, resolve the config, dispatch the
//! pipeline, and map failures to exit codes (2 for configuration problems,
//! 1 for solver or I/O failures with a machine-readable `failure.json`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mixfrac_cli::config::{self, Cli, Command};
use mixfrac_cli::pipelines;
use mixfrac_cli::report::{write_failure, FailureReport};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let dump = matches!(&cli.command, Command::Verify(v) if v.dump_matrices);
    let cfg = match config::resolve(name, cli.command.common()) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprint!("{errors}");
            return ExitCode::from(2);
        }
    };
    let out = PathBuf::from(&cfg.out);
    let echo = cfg.clone();
    match pipelines::run(cfg, dump) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(failure) => {
            let doc = FailureReport {
                stage: failure.stage,
                message: failure.message.clone(),
                data: &echo,
            };
            match write_failure(&out, &doc) {
                Ok(p) => eprintln!(
                    "{} failed: {} (details in {})",
                    failure.stage,
                    failure.message,
                    p.display()
                ),
                Err(e) => eprintln!(
                    "{} failed: {} (could not write failure.json: {e})",
                    failure.stage, failure.message
                ),
            }
            ExitCode::FAILURE
        }
    }
}
