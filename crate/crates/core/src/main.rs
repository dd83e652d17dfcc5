use std::process::ExitCode;

fn main() -> ExitCode {
    asem::cli::main()
}
