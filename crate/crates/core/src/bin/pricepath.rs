use std::process::ExitCode;

fn main() -> ExitCode {
    pricepath::cli::run()
}
