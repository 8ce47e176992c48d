use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

mod args;
mod commands;
mod error;
mod manifest;

use args::{Cli, Command};
use commands::Context;
use error::{CliError, Result};
use manifest::{digest_inputs, read_manifest, sha256_file};

fn execute(mut command: Command) -> Result<()> {
    command.absolutize();
    if let Command::Rerun(args) = &command {
        let manifest = read_manifest(&args.manifest)?;
        for input in &manifest.inputs {
            let now = sha256_file(&input.path).map_err(|e| error::read_error(&input.path, e))?;
            if now != input.sha256 {
                return Err(CliError::input(format!(
                    "{} changed since the manifest was written",
                    input.path.display()
                )));
            }
        }
        let mut config = manifest.config;
        if matches!(config, Command::Rerun(_)) {
            return Err(CliError::input("manifest records a rerun"));
        }
        config.set_out(args.out.clone());
        return execute(config);
    }
    let started = Instant::now();
    let inputs = digest_inputs(&command.inputs())?;
    let ctx = Context {
        config: command.clone(),
        inputs,
        started,
    };
    match &command {
        Command::Run(a) => commands::run::run(a, ctx),
        Command::Enumerate(a) => commands::enumerate::run(a, ctx),
        Command::Diagnose(a) => commands::diagnose::run(a, ctx),
        Command::Sweep(a) => commands::sweep::run(a, ctx),
        Command::TreeCount(a) => commands::tree_count::run(a, ctx),
        Command::ToyTilt(a) => commands::toy_tilt::run(a, ctx),
        Command::Baseline(a) => commands::baseline::run(a, ctx),
        Command::Rerun(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mew: {e}");
            e.exit_code()
        }
    }
}
