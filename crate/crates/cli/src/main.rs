use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(entlink_cli::run(std::env::args_os()))
}
