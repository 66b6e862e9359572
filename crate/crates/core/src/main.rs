use std::process::ExitCode;

fn main() -> ExitCode {
    bell_wave::cli::main()
}
