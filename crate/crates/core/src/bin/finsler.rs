fn main() {
    std::process::exit(finsler::cli::main_with_args());
}
