fn main() {
    let code = thermsal_cli::run_command(std::env::args_os().skip(1));
    std::process::exit(code);
}
