use std::process::ExitCode;

fn main() -> ExitCode {
    globality::cli::main()
}
