use std::process::ExitCode;

fn main() -> ExitCode {
    hetnet_cli::run(std::env::args().collect())
}
