fn main() {
    std::process::exit(brirkit::cli::main_with_args(std::env::args_os()));
}
