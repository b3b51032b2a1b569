fn main() {
    std::process::exit(pafbox::cli::main());
}
