//! `tetspec`: experiment driver writing CSV tables, a JSON manifest and
//! Matrix Market files.

mod args;
mod output;
mod runs;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            output::report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match runs::execute(&cli) {
        Ok(dir) => {
            println!("{}", serde_json::json!({ "status": "ok", "out": dir }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            output::report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
