fn main() {
    std::process::exit(jumplab::cli::run());
}
