fn main() {
    std::process::exit(selfsim::cli::parse_and_dispatch(std::env::args_os()));
}
