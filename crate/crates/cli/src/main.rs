use std::process::ExitCode;

#[cfg(feature = "parallel")]
use anyhow::Context;
use anyhow::Result;
use clap::Parser;
use oppo_core::ExecMode;

mod cli;
mod commands;
mod config;
mod output;

use cli::{Cli, Command};
use config::RunConfig;
use output::Ctx;

const EXIT_FAILURE: u8 = 1;
const EXIT_DEGENERATE: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn exec_mode(jobs: Option<usize>) -> Result<ExecMode> {
    match jobs {
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(1) => Ok(ExecMode::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("cannot start worker pool")?;
            Ok(ExecMode::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(ExecMode::Sequential),
        None => Ok(ExecMode::Parallel),
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.global.seed.or(config.seed).unwrap_or(0);
    let mode = exec_mode(cli.global.jobs)?;
    let ctx = Ctx::new(cli.global.out_dir.clone(), seed, cli.global.pretty, mode, config);
    match &cli.command {
        Command::Pipeline(a) => commands::pipeline::run(&ctx, a),
        Command::Anon(a) => commands::anon::run(&ctx, a),
        Command::Gold(a) => commands::gold::run(&ctx, a),
        Command::Iaa(a) => commands::iaa::run(&ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Analyze(a) => commands::analyze::run(&ctx, a),
        Command::Validate(a) => commands::validate::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let degenerate = e
                .chain()
                .filter_map(|c| c.downcast_ref::<oppo_core::Error>())
                .any(oppo_core::Error::is_degenerate);
            ExitCode::from(if degenerate { EXIT_DEGENERATE } else { EXIT_FAILURE })
        }
    }
}
