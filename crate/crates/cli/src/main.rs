use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ratio_mc_cli::run(std::env::args_os()))
}
