fn main() {
    std::process::exit(renorm::cli::main_with(std::env::args_os()));
}
