fn main() -> std::process::ExitCode {
    percolab::cli::main_with_args(std::env::args_os())
}
