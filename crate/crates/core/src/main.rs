use clap::Parser;
use starcap::cli::{run, Cli, EXIT_INVALID, EXIT_OK};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_INVALID } else { EXIT_OK });
        }
    };
    ExitCode::from(run(&cli))
}
