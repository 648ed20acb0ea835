//! `isogm` command-line front end: data generation, training, oracle checks,
//! gradient checks and export for plotting.

mod args;
mod commands;
mod outputs;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Process exit status, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Config = 2,
    Solver = 3,
    Oracle = 4,
    Io = 5,
}

impl Status {
    pub fn of(err: &isogm::Error) -> Self {
        use isogm::Error::*;
        match err {
            Io { .. } | Csv(_) => Status::Io,
            Config(_) | Parse { .. } | Json(_) => Status::Config,
            TooLarge { .. } => Status::Oracle,
            _ => Status::Solver,
        }
    }
}

/// Failure carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn new(status: Status, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<isogm::Error> for Failure {
    fn from(err: isogm::Error) -> Self {
        Failure::new(Status::of(&err), err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Export(a) => commands::export(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
