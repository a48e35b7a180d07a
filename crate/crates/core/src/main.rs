fn main() {
    std::process::exit(redlaw::cli::main());
}
