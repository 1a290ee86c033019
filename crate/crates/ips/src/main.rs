fn main() -> std::process::ExitCode {
    ips::cli::main_with_args(std::env::args_os())
}
