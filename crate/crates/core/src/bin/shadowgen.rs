fn main() {
    std::process::exit(shadowgen::cli::main_entry());
}
