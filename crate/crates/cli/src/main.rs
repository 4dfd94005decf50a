//! `dynjudge` command-line front end.
//!
//! Exit status is 0 on success, 1 on domain errors (reported as
//! `{"error": {"code", "message"}}` on stderr) and 2 on usage errors.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use dynjudge::domain::json::JsonError;
use dynjudge::engine::EngineError;
use dynjudge::eval::EvalError;
use dynjudge::gateway::GatewayError;
use dynjudge::library::PipelineError;
use dynjudge::preference::TrainError;
use dynjudge::selector::SelectionError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dynjudge::Error),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config { .. } => "config",
            CliError::Usage(_) => "usage",
        }
    }

    fn missing(what: &str, flag: &str, key: &str) -> Self {
        CliError::Usage(format!("no {what} given; pass {flag} or set {key} in the config file"))
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

via_core!(JsonError, GatewayError, SelectionError, EngineError, PipelineError, TrainError, EvalError);

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv`, runs the subcommand and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            let body = serde_json::json!({ "error": { "code": e.code(), "message": e.to_string() } });
            let _ = writeln!(std::io::stderr(), "{body}");
            EXIT_DOMAIN
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run(std::env::args_os()));
}
