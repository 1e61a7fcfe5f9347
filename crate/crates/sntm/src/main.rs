fn main() {
    std::process::exit(sntm::cli::run(std::env::args_os()));
}
