fn main() {
    std::process::exit(freechain::cli::run(std::env::args_os()));
}
