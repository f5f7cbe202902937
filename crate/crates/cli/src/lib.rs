//! Command-line front end and HTTP service for `carimorph-core`.
//!
//! Exit codes: 0 on success, 1 for a failed operation, 2 for a usage error.
//! Set `CARIMORPH_LOG` (e.g. `info`, `debug`) to enable logging on stderr.

use std::ffi::OsString;

use clap::Parser;

pub mod cli;
mod commands;
pub mod ops;
pub mod payload;
pub mod service;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CARIMORPH_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(parsed) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
