fn main() {
    std::process::exit(ordevo::cli::run_cli(std::env::args_os()));
}
