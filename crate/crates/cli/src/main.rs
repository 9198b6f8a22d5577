use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(atomsim_cli::run(std::env::args_os()) as u8)
}
