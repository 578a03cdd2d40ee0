fn main() {
    std::process::exit(srlab::harness::cli::run(std::env::args_os()));
}
