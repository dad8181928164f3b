use std::process::ExitCode;

fn main() -> ExitCode {
    dephasing::cli::main()
}
