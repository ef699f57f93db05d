//! Command-line front end of the curve-shortening-flow laboratory.
//!
//! [`run`] parses arguments, executes one subcommand and returns the exit
//! code: 0 on success, 1 when the computation fails (or `verify` finds a
//! failing criterion), 2 on usage errors.

pub mod commands;
pub mod config;
pub mod verify;

use std::ffi::OsString;

use clap::Parser;
use csflab_core::io::{read_json, write_json};
use csflab_core::par::Exec;
use csflab_core::CsfError;

use crate::commands::{execute, UsageError};
use crate::config::{Cli, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Initializes logging from `CSFLAB_LOG` (`error`, `info` or `debug`;
/// default `error`). Safe to call more than once.
pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("CSFLAB_LOG", "error");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Name of the error variant, e.g. `StepRejected`.
pub fn error_kind(e: &CsfError) -> String {
    format!("{e:?}")
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

fn resolve(cli: Cli) -> Result<RunConfig, UsageError> {
    let cfg = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            return Err(UsageError(
                "--config replaces the subcommand; give only one".into(),
            ))
        }
        (Some(path), None) => read_json::<RunConfig>(&path)
            .map_err(|e| UsageError(format!("cannot load config {}: {e}", path.display())))?,
        (None, Some(command)) => RunConfig {
            seed: cli.seed,
            threads: cli.threads,
            command,
        },
        (None, None) => return Err(UsageError("no subcommand given (see --help)".into())),
    };
    cfg.validate().map_err(UsageError)?;
    if let Some(path) = &cli.save_config {
        write_json(path, &cfg).map_err(|e| UsageError(format!("cannot save config: {e}")))?;
    }
    Ok(cfg)
}

fn exec_for(threads: Option<usize>) -> Exec {
    if let Some(n) = threads {
        // the global pool can only be configured once per process
        #[cfg(feature = "parallel")]
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("rayon pool already initialized; --threads {n} ignored for pool size");
        }
        if n == 1 {
            return Exec::Sequential;
        }
    }
    Exec::default()
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let exec = exec_for(cfg.threads);
    log::info!("running {} with seed {}", cfg.command.name(), cfg.seed);
    match execute(&cfg, exec) {
        Ok(out) => {
            println!("{}", out.summary);
            out.exit_code
        }
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("error: {u}");
                return EXIT_USAGE;
            }
            match e.downcast_ref::<CsfError>() {
                Some(c) => eprintln!("error: {}: {c}", error_kind(c)),
                None => eprintln!("error: {e:#}"),
            }
            EXIT_FAILURE
        }
    }
}
