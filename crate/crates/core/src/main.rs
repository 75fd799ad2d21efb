use std::process::ExitCode;

fn main() -> ExitCode {
    oracle_frugal::cli::main_with_args(std::env::args_os())
}
