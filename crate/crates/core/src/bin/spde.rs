fn main() {
    std::process::exit(spde::cli::main());
}
