fn main() {
    std::process::exit(mlrem_cli::run());
}
