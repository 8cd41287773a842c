fn main() {
    std::process::exit(nphkit::cli::run(std::env::args_os()));
}
