fn main() {
    std::process::exit(tpp::cli::run(std::env::args_os()));
}
