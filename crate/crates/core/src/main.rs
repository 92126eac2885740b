fn main() {
    std::process::exit(umet::cli::run(std::env::args_os()));
}
