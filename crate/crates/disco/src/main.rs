fn main() {
    std::process::exit(disco::cli::run(std::env::args_os()));
}
