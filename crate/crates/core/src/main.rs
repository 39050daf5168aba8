fn main() {
    std::process::exit(appnet::cli::run_from(std::env::args_os()));
}
