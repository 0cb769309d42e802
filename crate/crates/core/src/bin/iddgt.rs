fn main() {
    std::process::exit(iddgt::harness::cli::cli(std::env::args_os()));
}
