fn main() {
    std::process::exit(projcond::cli::run(std::env::args_os()));
}
