fn main() {
    std::process::exit(hdcov::cli::main_with_args(std::env::args_os()));
}
