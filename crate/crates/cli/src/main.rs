fn main() {
    std::process::exit(hardyflow_cli::main_with_args(std::env::args_os()));
}
