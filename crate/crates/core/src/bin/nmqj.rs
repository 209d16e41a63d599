fn main() {
    std::process::exit(nmqj::cli::main_with_args(std::env::args_os()));
}
