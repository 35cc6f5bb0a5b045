fn main() {
    std::process::exit(sicr::cli::run(std::env::args_os().skip(1)));
}
