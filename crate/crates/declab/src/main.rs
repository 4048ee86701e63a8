fn main() {
    std::process::exit(declab::cli::main_entry());
}
