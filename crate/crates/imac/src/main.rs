fn main() {
    std::process::exit(imac::cli::run(std::env::args_os()));
}
