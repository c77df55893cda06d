//! `rickerpp`: run the map analyses from the command line.
//!
//! Exit codes: 0 success, 1 analysis failure, 2 usage error, 3 I/O error.

mod commands;
mod config;
mod emit;

use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    Usage(String),
    Analysis(String),
    Io(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
    pub fn analysis(msg: impl Into<String>) -> Self {
        Self::Analysis(msg.into())
    }
    pub fn io(msg: impl Into<String>) -> Self {
        Self::Io(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            Self::Clap(e) if !e.use_stderr() => 0,
            Self::Clap(_) | Self::Usage(_) => 2,
            Self::Analysis(_) => 1,
            Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clap(e) => write!(f, "{e}"),
            Self::Usage(m) | Self::Analysis(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

fn run() -> Result<(), CliError> {
    let cfg = config::parse_args(std::env::args_os())?;
    let out = commands::run(&cfg)?;
    let text = emit::render(cfg.command, &cfg.params, cfg.format, &out);
    emit::write_sink(&text, cfg.output.as_deref())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            // clap formats help, version and usage errors itself
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("rickerpp: {e}");
            ExitCode::from(e.code())
        }
    }
}
