use std::process::ExitCode;

fn main() -> ExitCode {
    phshift::cli::main_with_args(std::env::args_os())
}
