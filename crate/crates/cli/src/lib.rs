//! The `argus` command line.

pub mod args;
pub mod commands;
pub mod config;
pub mod demo;
pub mod error;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use error::Result;

fn dispatch(ctx: &Ctx, cmd: &Command) -> Result<PathBuf> {
    match cmd {
        Command::Ingest(a) => commands::ingest(ctx, a),
        Command::Agreement(a) => commands::agreement(ctx, a),
        Command::Split(a) => commands::split(ctx, a),
        Command::Train(a) => commands::train(ctx, a),
        Command::Cv(a) => commands::cv(ctx, a),
        Command::Calibrate(a) => commands::calibrate(ctx, a),
        Command::Evaluate(a) => commands::evaluate(ctx, a),
        Command::Score(a) => commands::score(ctx, a),
        Command::Analyze(a) => commands::analyze(ctx, a),
        Command::LlmProbe(a) => commands::llm_probe(ctx, a),
        Command::PlotData(a) => commands::plot_data(ctx, a),
        Command::Demo(a) => demo::demo(ctx, a),
    }
}

/// Runs one invocation and returns the process exit code: 0 on success,
/// 1 for usage and validation errors, 2 for numerical failures.
pub fn run(argv: impl IntoIterator<Item = OsString>) -> i32 {
    let argv = match config::merge(argv.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        seed: cli.seed,
    };
    match dispatch(&ctx, &cli.command) {
        Ok(manifest) => {
            log::info!("manifest: {}", manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
