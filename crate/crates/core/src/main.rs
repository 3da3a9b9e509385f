fn main() {
    std::process::exit(mixdiff::cli::main_entry());
}
