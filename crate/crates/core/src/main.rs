fn main() {
    std::process::exit(sddhopf::cli::main_entry());
}
