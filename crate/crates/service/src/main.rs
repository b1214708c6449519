use std::process::ExitCode;

fn main() -> ExitCode {
    fineval::cli::run(std::env::args_os())
}
