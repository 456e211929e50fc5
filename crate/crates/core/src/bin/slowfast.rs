fn main() {
    std::process::exit(slowfast::cli::main_entry());
}
