use std::process::ExitCode;

fn main() -> ExitCode {
    seasonality_cli::app::main()
}
