fn main() {
    std::process::exit(hawkes_lab::cli::run_cli(std::env::args_os()));
}
