//! `ssmfrc`: forced response curves through spectral submanifold reduction.
//!
//! Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 validation failure.
//! Failures print one JSON error record on standard error.

mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::commands::{dispatch, Ctx};
use crate::config::{config_path, merge_config};
use crate::output::{Failure, Header};

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

fn run(argv: Vec<OsString>) -> i32 {
    let header = Header::new(&argv);
    let effective = match config_path(&argv) {
        Some(p) => match merge_config(argv, Path::new(&p)) {
            Ok(v) => v,
            Err(m) => return fail(Failure::usage(m)),
        },
        None => argv,
    };
    let cli = match Cli::try_parse_from(&effective) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => fail(Failure::usage(e.render().to_string().trim().to_string())),
            };
        }
    };
    init_logging(cli.quiet, cli.verbose);
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(Failure::usage("--threads must be positive"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(Failure::usage(format!("thread pool: {e}")));
        }
    }
    let ctx = Ctx { header, quiet: cli.quiet };
    match dispatch(&cli.command, &ctx) {
        Ok(()) => 0,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> i32 {
    log::debug!(target: "cli", "{f}");
    eprintln!("{}", f.record());
    f.code()
}

/// Log lines carry their pipeline stage as the target; `SSMFRC_LOG`
/// overrides the level chosen by the flags.
fn init_logging(quiet: bool, verbose: u8) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("SSMFRC_LOG").format_timestamp(None).init();
}
