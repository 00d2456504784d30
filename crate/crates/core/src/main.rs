fn main() {
    std::process::exit(fbdiff::cli::run(std::env::args_os()));
}
