use std::process::ExitCode;

use clap::Parser;
use notrade_cli::{emit, execute, output_args, Cli, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                Status::BadInput.code()
            } else {
                0
            };
            return ExitCode::from(code as u8);
        }
    };
    let result =
        execute(&cli).and_then(|out| emit(output_args(&cli), &out.text).map(|()| out.status));
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.status.code() as u8)
        }
    }
}
