fn main() {
    std::process::exit(betaescape::cli::run_from_env());
}
