use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(aimd_arena::main_with_args(std::env::args_os()))
}
