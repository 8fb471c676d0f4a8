fn main() {
    std::process::exit(ionflux::cli::main_with_args(std::env::args_os()));
}
