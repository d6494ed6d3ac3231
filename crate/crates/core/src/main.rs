fn main() {
    std::process::exit(hdcov::cli::run_from_args(std::env::args_os()));
}
