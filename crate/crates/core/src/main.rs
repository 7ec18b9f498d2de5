fn main() {
    std::process::exit(lipmod::cli::run(std::env::args_os()));
}
