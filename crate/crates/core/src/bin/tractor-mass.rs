use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tractor_mass::cli::run(std::env::args_os()) as u8)
}
