use std::process::ExitCode;

fn main() -> ExitCode {
    fieldsynth::cli::main()
}
