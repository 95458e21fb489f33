//! `shutterforge` command-line interface.
//!
//! Every subcommand prints one JSON report `{"command", "params", "results"}`
//! on stdout. Tensors are written only to `--out` paths. Exit status is 0 on
//! success, 1 when a computation fails (with a JSON error on stderr) and 2 on
//! usage errors.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use args::Cli;

const THREADS_ENV: &str = "SHUTTERFORGE_THREADS";

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: missing input, conflicting or invalid flags.
    Usage(String),
    /// The computation itself failed. `partial` is printed as the report
    /// results when some work was done.
    Compute {
        error: shutterforge::Error,
        partial: Option<Value>,
    },
}

impl From<shutterforge::Error> for Failure {
    fn from(error: shutterforge::Error) -> Self {
        Failure::Compute {
            error,
            partial: None,
        }
    }
}

pub type CmdResult = Result<Value, Failure>;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("reports serialize"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let (name, params) = cli.command.describe();
    match commands::run(&cli.command) {
        Ok(results) => {
            print_json(&json!({ "command": name, "params": params, "results": results }));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Compute { error, partial }) => {
            if let Some(results) = partial {
                print_json(&json!({ "command": name, "params": params, "results": results }));
            }
            let err = json!({
                "command": name,
                "error": { "kind": error.kind(), "message": error.to_string() },
            });
            eprintln!("{}", serde_json::to_string(&err).expect("errors serialize"));
            ExitCode::from(1)
        }
    }
}
