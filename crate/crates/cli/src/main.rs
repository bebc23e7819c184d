//! `bpri`: experiment runner for the Gibbs-channel solvers.
//!
//! Exit status: 0 on success, 1 when a solver reports non-convergence or a
//! run fails, 2 on configuration errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command};
use commands::Env;
use config::{overlay, CliResult};

fn with_config<T: Serialize + DeserializeOwned + Clone>(
    args: &T,
    cli: &Cli,
    env: &mut Env,
) -> CliResult<T> {
    match &cli.config {
        None => Ok(args.clone()),
        Some(path) => {
            let (merged, header) = overlay(args, path, cli.command.name())?;
            if let Some(dir) = header.out_dir {
                env.out_dir = dir;
            }
            Ok(merged)
        }
    }
}

fn run(cli: &Cli) -> CliResult<String> {
    let mut env = Env { out_dir: cli.out_dir.clone(), bits: cli.bits };
    match &cli.command {
        Command::Solve(a) => commands::solve(&with_config(a, cli, &mut env)?, &env),
        Command::Capacity(a) => commands::capacity(&with_config(a, cli, &mut env)?, &env),
        Command::Frontier(a) => commands::frontier(&with_config(a, cli, &mut env)?, &env),
        Command::Sba(a) => commands::sba(&with_config(a, cli, &mut env)?, &env),
        Command::MnlMc(a) => commands::mnl_mc(&with_config(a, cli, &mut env)?, &env),
        Command::TriChoice(a) => commands::tri_choice(&with_config(a, cli, &mut env)?, &env),
        Command::Stein(a) => commands::stein(&with_config(a, cli, &mut env)?, &env),
        Command::SteinHighdim(a) => commands::stein_highdim_cmd(&with_config(a, cli, &mut env)?, &env),
        Command::Lqg(a) => commands::lqg(&with_config(a, cli, &mut env)?, &env),
        Command::Bellman(a) => commands::bellman(&with_config(a, cli, &mut env)?, &env),
        Command::Selftest(a) => commands::selftest_cmd(&with_config(a, cli, &mut env)?, &env),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
