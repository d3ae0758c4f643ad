use std::process::ExitCode;

fn main() -> ExitCode {
    bicot::cli::main()
}
