fn main() {
    std::process::exit(gpev::cli::run_from_env());
}
