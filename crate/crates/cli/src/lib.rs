//! Command-line front end: argument parsing, JSON/CSV output and the
//! acceptance checks behind `twophase verify`.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod verify;

use std::io::Write;

use args::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Ops(a) => commands::ops(a, out),
        Command::Qfi(a) => commands::qfi(a, out),
        Command::Scan(a) => commands::scan_cmd(a, out),
        Command::Simulate(a) => commands::simulate_cmd(a, out),
        Command::Optimize(a) => commands::optimize_cmd(a, out),
        Command::Squeeze(a) => commands::squeeze_cmd(a, out),
        Command::Verify(a) => commands::verify_cmd(a, out),
    }
}
